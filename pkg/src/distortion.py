"""
Distorsions à une lettre sur les paires de vues locales, moyenne σ⁽ⁿ⁾ sur un
graphe et appartenance à la boule de distorsion B(x, α).
"""

import itertools
import math
from functools import cached_property
from typing import Literal, Mapping, Sequence

import numpy as np

from src.empirical import DEFAULT_CAP, LocalView

DistortionKind = Literal["hamming_color", "squared_degree", "table", "constant"]
DISTORTION_KINDS = ("hamming_color", "squared_degree", "table", "constant")


def hamming_color(vx: LocalView, vy: LocalView) -> float:
    """1 si les couleurs diffèrent, 0 sinon."""
    return 0.0 if vx.color == vy.color else 1.0


def squared_degree(vx: LocalView, vy: LocalView) -> float:
    """(deg x − deg y)², degré total de la vue locale."""
    if len(vx.counts) != len(vy.counts):
        raise ValueError("Local views over different alphabets")
    return float((sum(vx.counts) - sum(vy.counts)) ** 2)


def truncated_views(k: int, cap: int) -> list[LocalView]:
    """Support tronqué : toutes les vues (a, ℓ) avec ℓ ∈ {0..cap}^k, ordre (a, ℓ) lexicographique."""
    return [
        LocalView(a, counts)
        for a in range(k)
        for counts in itertools.product(range(cap + 1), repeat=k)
    ]


class DistortionFn:
    """
    Distorsion σ : vues × vues → [0, ∞), bornée sur le support tronqué.

    Les types `hamming_color`, `squared_degree` et `constant` sont évalués
    vectoriellement ; le type `table` lit une table explicite qui doit couvrir
    tout le support tronqué.
    """

    def __init__(
        self,
        kind: DistortionKind,
        k: int,
        cap: int = DEFAULT_CAP,
        *,
        table: Mapping[tuple[LocalView, LocalView], float] | None = None,
        value: float = 0.0,
    ):
        if kind not in DISTORTION_KINDS:
            raise ValueError(f"Unknown distortion kind: {kind}")
        if k < 1 or cap < 1:
            raise ValueError("Distortion needs k >= 1 and cap >= 1")
        if kind == "constant" and (value < 0 or not math.isfinite(value)):
            raise ValueError("Constant distortion must be finite and nonnegative")
        self.kind = kind
        self.k = k
        self.cap = cap
        self.value = float(value)
        self._table: dict[tuple[LocalView, LocalView], float] | None = None

        if kind == "table":
            if table is None:
                raise ValueError("Table distortion needs a table")
            self._table = {key: float(v) for key, v in table.items()}
            if any(v < 0 or not math.isfinite(v) for v in self._table.values()):
                raise ValueError("Distortion table values must be finite and nonnegative")
            views = truncated_views(k, cap)
            missing = sum(1 for vx in views for vy in views if (vx, vy) not in self._table)
            if missing:
                raise ValueError(
                    f"Distortion table does not cover the truncated support ({missing} pairs missing)"
                )

    @classmethod
    def constant(cls, value: float, k: int, cap: int = DEFAULT_CAP) -> "DistortionFn":
        return cls("constant", k, cap, value=value)

    @property
    def needs_counts(self) -> bool:
        """Faux quand σ ne dépend que des couleurs (pas besoin des arêtes de Y)."""
        return self.kind in ("squared_degree", "table")

    @property
    def symmetric(self) -> bool:
        return self.kind != "table" or all(
            self._table[(vy, vx)] == v for (vx, vy), v in self._table.items()
        )

    @cached_property
    def bound(self) -> float:
        """sup σ sur le support tronqué."""
        if self.kind == "hamming_color":
            return 1.0 if self.k > 1 else 0.0
        if self.kind == "squared_degree":
            return float((self.k * self.cap) ** 2)
        if self.kind == "constant":
            return self.value
        return max(self._table.values())

    def __call__(self, vx: LocalView, vy: LocalView) -> float:
        if self.kind == "hamming_color":
            return hamming_color(vx, vy)
        if self.kind == "squared_degree":
            return squared_degree(vx, vy)
        if self.kind == "constant":
            return self.value
        return self._table[(vx, vy)]

    def evaluate(
        self,
        colors_x: np.ndarray,
        counts_x: np.ndarray,
        colors_y: np.ndarray,
        counts_y: np.ndarray,
    ) -> np.ndarray:
        """
        σ élément par élément (avec broadcasting numpy).

        Args:
            colors_x: couleurs, forme (...)
            counts_x: comptages saturés, forme (..., k)
            colors_y, counts_y: idem pour le second processus

        Returns:
            Tableau des distorsions, forme diffusée des couleurs
        """
        colors_x = np.asarray(colors_x)
        colors_y = np.asarray(colors_y)
        shape = np.broadcast_shapes(colors_x.shape, colors_y.shape)
        if self.kind == "hamming_color":
            return np.broadcast_to(colors_x != colors_y, shape).astype(float)
        if self.kind == "constant":
            return np.full(shape, self.value)
        if self.kind == "squared_degree":
            deg_x = np.asarray(counts_x).sum(axis=-1)
            deg_y = np.asarray(counts_y).sum(axis=-1)
            return ((deg_x - deg_y) ** 2).astype(float)

        cx, lx, cy, ly = np.broadcast_arrays(
            colors_x[..., None], np.asarray(counts_x), colors_y[..., None], np.asarray(counts_y)
        )
        out = np.empty(shape)
        flat_cx, flat_cy = cx[..., 0].reshape(-1), cy[..., 0].reshape(-1)
        flat_lx = lx.reshape(-1, self.k)
        flat_ly = ly.reshape(-1, self.k)
        flat = out.reshape(-1)
        for i in range(len(flat)):
            key = (
                LocalView(int(flat_cx[i]), tuple(int(c) for c in flat_lx[i])),
                LocalView(int(flat_cy[i]), tuple(int(c) for c in flat_ly[i])),
            )
            flat[i] = self._table[key]
        return out

    def pairwise(self, colors: np.ndarray, counts: np.ndarray) -> np.ndarray:
        """Matrice σ(x_i, x_j) sur une liste d'atomes (couleurs (N,), comptages (N, k))."""
        colors = np.asarray(colors)
        counts = np.asarray(counts)
        return self.evaluate(colors[:, None], counts[:, None, :], colors[None, :], counts[None, :, :])

    def __repr__(self) -> str:
        return f"DistortionFn(kind={self.kind!r}, k={self.k}, cap={self.cap})"


def _check_lengths(xs: Sequence, ys: Sequence) -> None:
    if len(xs) != len(ys):
        raise ValueError(f"Length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) == 0:
        raise ValueError("sigma_n needs at least one vertex")


def sigma_n(xs: Sequence[LocalView], ys: Sequence[LocalView], f: DistortionFn) -> float:
    """σ⁽ⁿ⁾(x, y) = (1/n) Σ_i σ(B_x(z_i), B_y(z_i))."""
    _check_lengths(xs, ys)
    return math.fsum(f(vx, vy) for vx, vy in zip(xs, ys)) / len(xs)


def sigma_n_arrays(
    colors_x: np.ndarray,
    counts_x: np.ndarray,
    colors_y: np.ndarray,
    counts_y: np.ndarray,
    f: DistortionFn,
) -> float:
    """Version tableau de sigma_n (comptages déjà saturés au cap de f)."""
    _check_lengths(colors_x, colors_y)
    return math.fsum(f.evaluate(colors_x, counts_x, colors_y, counts_y).tolist()) / len(colors_x)


def in_ball(xs: Sequence[LocalView], ys: Sequence[LocalView], f: DistortionFn, alpha: float) -> bool:
    """y ∈ B(x, α) ⇔ σ⁽ⁿ⁾(x, y) ≤ α."""
    if alpha < 0:
        raise ValueError(f"alpha must be nonnegative, got {alpha}")
    return sigma_n(xs, ys, f) <= alpha


def distortion_from_config(config, k: int, table=None) -> DistortionFn:
    """Construit σ depuis la section `distortion` (la table est chargée par l'appelant)."""
    if config.kind == "table":
        return DistortionFn("table", k, config.cap, table=table)
    if config.kind == "constant":
        return DistortionFn.constant(config.value, k, config.cap)
    return DistortionFn(config.kind, k, config.cap)
