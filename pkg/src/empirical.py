"""
Objets empiriques d'un CGRG réalisé : vues locales B_X(z_v), mesures empiriques
L_{n,1}, L_{n,2}, L_n jointe, mesure des paires ω_n, loi des couleurs π_n, et
l'application Ψ qui renvoie le type (π, ω) d'une mesure sur les vues locales.
"""

import math
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np
from scipy import stats

from src.cgrg_core import ColoredGeometricGraph, sample_graph
from src.config_loader import ModelParams
from src.logger import get_logger

logger = get_logger(__name__)

DEFAULT_CAP = 30
CONSISTENCY_TOL = 1e-9


@dataclass(frozen=True, order=True)
class LocalView:
    """Couleur d'un sommet et comptage (tronqué) de ses voisins par couleur."""

    color: int
    counts: tuple[int, ...]

    @property
    def degree(self) -> int:
        return sum(self.counts)


class Measure:
    """
    Mesure finie positive sur un support discret (vues locales, paires de vues,
    paires de couleurs).
    """

    def __init__(
        self,
        support: Iterable[Hashable],
        weights,
        *,
        probability: bool = False,
        tol: float = 1e-9,
    ):
        self._support = tuple(support)
        self._weights = np.asarray(weights, dtype=float).reshape(-1)
        if len(self._support) != len(self._weights):
            raise ValueError("Support and weights must have the same length")
        if np.any(~np.isfinite(self._weights)) or np.any(self._weights < 0):
            raise ValueError("Measure weights must be finite and nonnegative")
        self._index = {atom: i for i, atom in enumerate(self._support)}
        if len(self._index) != len(self._support):
            raise ValueError("Measure support contains duplicate atoms")
        self._weights.setflags(write=False)
        self.total = math.fsum(self._weights)
        self.probability = probability
        if probability and abs(self.total - 1.0) > tol:
            raise ValueError(f"Probability measure has total mass {self.total!r}")

    @classmethod
    def from_samples(cls, atoms: Sequence[Hashable]) -> "Measure":
        """Mesure empirique (1/n) Σ δ_atome, support trié."""
        if len(atoms) == 0:
            raise ValueError("Cannot build an empirical measure from an empty list")
        tally = Counter(atoms)
        support = sorted(tally)
        n = len(atoms)
        return cls(support, [tally[a] / n for a in support], probability=True)

    @classmethod
    def from_mapping(cls, mapping: dict, *, probability: bool = False) -> "Measure":
        support = sorted(mapping)
        return cls(support, [mapping[a] for a in support], probability=probability)

    @property
    def support(self) -> tuple:
        return self._support

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    def __len__(self) -> int:
        return len(self._support)

    def __contains__(self, atom) -> bool:
        return atom in self._index

    def items(self):
        return zip(self._support, self._weights.tolist())

    def weight(self, atom) -> float:
        i = self._index.get(atom)
        return 0.0 if i is None else float(self._weights[i])

    def expectation(self, fn: Callable[[Hashable], float]) -> float:
        """⟨f, μ⟩ en sommation compensée."""
        return math.fsum(w * fn(atom) for atom, w in self.items())

    def pushforward(self, fn: Callable[[Hashable], Hashable]) -> "Measure":
        mapped: dict = {}
        for atom, w in self.items():
            key = fn(atom)
            mapped.setdefault(key, []).append(w)
        support = sorted(mapped)
        weights = [math.fsum(mapped[a]) for a in support]
        return Measure(support, weights, probability=self.probability)

    def marginal(self, index: int) -> "Measure":
        """Marginale d'une mesure sur des paires (index 0 ou 1)."""
        return self.pushforward(lambda atom: atom[index])

    def normalized(self) -> "Measure":
        if self.total <= 0:
            raise ValueError("Cannot normalize a zero measure")
        return Measure(self._support, self._weights / self.total, probability=True)

    def as_dict(self) -> dict:
        return dict(self.items())

    def __repr__(self) -> str:
        return f"Measure(atoms={len(self)}, total={self.total!r})"


@dataclass(frozen=True, eq=False)
class TypePair:
    """Type (π, ω) : loi des couleurs et matrice d'intensité des paires."""

    pi: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float)
        omega = np.asarray(self.omega, dtype=float)
        k = len(pi)
        if pi.ndim != 1 or omega.shape != (k, k):
            raise ValueError("TypePair needs pi of shape (k,) and omega of shape (k, k)")
        if np.any(pi < 0) or np.any(omega < 0):
            raise ValueError("TypePair entries must be nonnegative")
        if abs(math.fsum(pi) - 1.0) > 1e-9:
            raise ValueError("pi must sum to 1 within 1e-9")
        pi.setflags(write=False)
        omega.setflags(write=False)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "omega", omega)

    @property
    def k(self) -> int:
        return len(self.pi)

    @property
    def consistent(self) -> bool:
        return self.is_consistent()

    def is_consistent(self, tol: float = CONSISTENCY_TOL) -> bool:
        """ω symétrique à tol près."""
        return bool(np.max(np.abs(self.omega - self.omega.T), initial=0.0) <= tol)

    def sup_distance(self, other: "TypePair") -> float:
        """‖(π, ω) − (π', ω')‖_∞."""
        if other.k != self.k:
            raise ValueError("TypePairs over different alphabets")
        return float(
            max(np.max(np.abs(self.pi - other.pi)), np.max(np.abs(self.omega - other.omega)))
        )


# ------------------------------------------------------------------------
# Vues locales et mesures empiriques
# ------------------------------------------------------------------------

def view_arrays(g: ColoredGeometricGraph, cap: int = DEFAULT_CAP) -> tuple[np.ndarray, np.ndarray]:
    """Couleurs (n,) et comptages saturés à cap (n, k)."""
    if cap < 1:
        raise ValueError(f"Truncation cap must be >= 1, got {cap}")
    return g.colors, np.minimum(g.color_counts, cap)


def views_from_arrays(colors: np.ndarray, counts: np.ndarray) -> list[LocalView]:
    return [LocalView(int(c), tuple(row)) for c, row in zip(colors.tolist(), counts.tolist())]


def local_views(g: ColoredGeometricGraph, cap: int = DEFAULT_CAP) -> list[LocalView]:
    """Une vue locale par sommet, dans l'ordre des sommets ; counts[b] = min(cap, #voisins b)."""
    colors, counts = view_arrays(g, cap)
    return views_from_arrays(colors, counts)


def empirical_measure(views: Sequence[LocalView]) -> Measure:
    """L_{n,1} : poids d'une vue = multiplicité / n."""
    return Measure.from_samples(list(views))


def joint_from_views(xs: Sequence[LocalView], ys: Sequence[LocalView]) -> Measure:
    if len(xs) != len(ys):
        raise ValueError(f"Vertex count mismatch: {len(xs)} vs {len(ys)}")
    return Measure.from_samples(list(zip(xs, ys)))


def joint_empirical(
    gx: ColoredGeometricGraph, gy: ColoredGeometricGraph, cap: int = DEFAULT_CAP
) -> Measure:
    """L_n jointe : atome (B_X(z_v), B_Y(z_v)) par sommet v."""
    if gx.n != gy.n:
        raise ValueError(f"Vertex count mismatch: {gx.n} vs {gy.n}")
    return joint_from_views(local_views(gx, cap), local_views(gy, cap))


def color_measure(g: ColoredGeometricGraph) -> Measure:
    """π_n sur l'alphabet (indices de couleur)."""
    counts = np.bincount(g.colors, minlength=g.k)
    return Measure(range(g.k), counts / g.n, probability=True)


def pair_counts(g: ColoredGeometricGraph) -> np.ndarray:
    """Nombre de paires ordonnées adjacentes par couleurs (a, b) ; symétrique."""
    k = g.k
    if g.num_edges == 0:
        return np.zeros((k, k), dtype=np.int64)
    cu = g.colors[g.edges[:, 0]]
    cv = g.colors[g.edges[:, 1]]
    flat = np.concatenate([cu * k + cv, cv * k + cu])
    return np.bincount(flat, minlength=k * k).reshape(k, k)


def pair_measure(g: ColoredGeometricGraph) -> Measure:
    """
    ω_n(a,b) = (1/n)·#{paires ordonnées adjacentes de couleurs (a,b)}.

    Une arête {u,v} compte pour (a,b) et (b,a) ; une arête (a,a) compte deux fois.
    """
    counts = pair_counts(g)
    k = g.k
    support = [(a, b) for a in range(k) for b in range(k)]
    return Measure(support, counts.reshape(-1) / g.n)


def graph_type_pair(g: ColoredGeometricGraph) -> TypePair:
    """(π_n, ω_n) calculé directement sur le graphe."""
    pi = np.bincount(g.colors, minlength=g.k) / g.n
    return TypePair(pi, pair_counts(g) / g.n)


def psi(mu: Measure) -> TypePair:
    """
    Ψ(μ) : π(a) = masse de la couleur a, ω(a,b) = Σ_ℓ ℓ(b)·μ(a,ℓ).

    L'asymétrie éventuelle de ω est signalée par `TypePair.consistent`.
    """
    if len(mu) == 0:
        raise ValueError("Psi of an empty measure")
    k = len(mu.support[0].counts)
    pi_terms: list[list[float]] = [[] for _ in range(k)]
    omega_terms: list[list[list[float]]] = [[[] for _ in range(k)] for _ in range(k)]
    for view, w in mu.items():
        if len(view.counts) != k:
            raise ValueError("Local views over different alphabets")
        pi_terms[view.color].append(w)
        for b, c in enumerate(view.counts):
            if c:
                omega_terms[view.color][b].append(c * w)
    pi = np.array([math.fsum(t) for t in pi_terms])
    omega = np.array([[math.fsum(t) for t in row] for row in omega_terms])
    return TypePair(pi, omega)


def total_variation(mu: Measure, nu: Measure) -> float:
    """½ Σ |μ − ν| sur la réunion des supports."""
    atoms = set(mu.support) | set(nu.support)
    return 0.5 * math.fsum(abs(mu.weight(a) - nu.weight(a)) for a in atoms)


# ------------------------------------------------------------------------
# Conditionnement souple sur Ψ
# ------------------------------------------------------------------------

def within_soft_condition(tp: TypePair, target: TypePair, tau: float) -> bool:
    """Accepte si ‖Ψ − (π, ω)‖_∞ ≤ τ."""
    return tp.sup_distance(target) <= tau


def sample_conditioned_graph(
    params: ModelParams,
    target: TypePair,
    tau: float,
    replicate: int = 0,
    *,
    stream: int = 0,
    max_attempts: int = 1000,
) -> tuple[ColoredGeometricGraph, int]:
    """
    Tire des graphes jusqu'à ce que leur type (π_n, ω_n) soit à τ de la cible.

    Returns:
        (graphe accepté, nombre de tentatives)

    Raises:
        ValueError: aucune tentative acceptée
    """
    for attempt in range(max_attempts):
        g = sample_graph(params, replicate, stream=stream, attempt=attempt)
        if within_soft_condition(graph_type_pair(g), target, tau):
            if attempt:
                logger.debug("soft_condition_accepted", replicate=replicate, attempts=attempt + 1)
            return g, attempt + 1
    logger.warning("soft_condition_failed", replicate=replicate, tau=tau, attempts=max_attempts)
    raise ValueError(
        f"Soft conditioning failed after {max_attempts} attempts (tau={tau}); "
        "increase tau or n"
    )


# ------------------------------------------------------------------------
# Ajustement de Poisson des comptages de voisins
# ------------------------------------------------------------------------

@dataclass(frozen=True)
class GoodnessOfFit:
    """Test du χ² d'un histogramme de comptages contre Poisson(mean)."""

    mean: float
    sample_size: int
    statistic: float
    dof: int
    p_value: float
    observed: tuple[float, ...]
    expected: tuple[float, ...]
    bin_edges: tuple[int, ...]

    def passes(self, significance: float = 0.01) -> bool:
        return self.p_value >= significance


def neighbor_count_histogram(colors: np.ndarray, counts: np.ndarray, a: int, b: int) -> np.ndarray:
    """Histogramme du nombre de voisins de couleur b chez les sommets de couleur a."""
    selected = counts[colors == a, b]
    return np.bincount(selected) if len(selected) else np.zeros(1, dtype=np.int64)


def _pool_bins(observed: np.ndarray, expected: np.ndarray, min_expected: float):
    """Regroupe les classes adjacentes jusqu'à une espérance ≥ min_expected."""
    obs_out, exp_out, edges = [], [], []
    acc_o, acc_e, start = 0.0, 0.0, 0
    for i, (o, e) in enumerate(zip(observed, expected)):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            obs_out.append(acc_o)
            exp_out.append(acc_e)
            edges.append(start)
            acc_o, acc_e, start = 0.0, 0.0, i + 1
    if acc_e > 0 or acc_o > 0:
        if exp_out:
            obs_out[-1] += acc_o
            exp_out[-1] += acc_e
        else:
            obs_out.append(acc_o)
            exp_out.append(acc_e)
            edges.append(start)
    return np.array(obs_out), np.array(exp_out), edges


def poisson_goodness_of_fit(
    counts,
    mean: float | None = None,
    *,
    sample_size: int | None = None,
    rng: np.random.Generator | None = None,
    min_expected: float = 5.0,
) -> GoodnessOfFit:
    """
    χ² des comptages contre Poisson(mean) ; queue regroupée dans la dernière classe.

    Sans `mean`, la moyenne empirique est utilisée et un degré de liberté est retiré.
    `sample_size` sous-échantillonne les sommets (les comptages de sommets proches
    sont corrélés par la géométrie).
    """
    counts = np.asarray(counts, dtype=np.int64)
    if sample_size is not None and len(counts) > sample_size:
        rng = rng or np.random.default_rng(0)
        counts = rng.choice(counts, size=sample_size, replace=False)
    size = len(counts)
    if size == 0:
        raise ValueError("Goodness of fit needs at least one count")

    estimated = mean is None
    mean = float(counts.mean()) if estimated else float(mean)
    if mean <= 0.0:
        ok = bool(np.all(counts == 0))
        return GoodnessOfFit(mean, size, 0.0 if ok else math.inf, 0, 1.0 if ok else 0.0,
                             (float(size),), (float(size),), (0,))

    top = int(max(counts.max(), stats.poisson.ppf(1 - 1e-12, mean))) + 1
    observed = np.bincount(np.minimum(counts, top), minlength=top + 1).astype(float)
    probs = stats.poisson.pmf(np.arange(top + 1), mean)
    probs[-1] = stats.poisson.sf(top - 1, mean)
    expected = size * probs / probs.sum()

    obs, exp, edges = _pool_bins(observed, expected, min_expected)
    ddof = 1 if estimated else 0
    dof = len(obs) - 1 - ddof
    if dof < 1:
        return GoodnessOfFit(mean, size, 0.0, 0, 1.0, tuple(obs), tuple(exp), tuple(edges))
    result = stats.chisquare(obs, exp, ddof=ddof)
    return GoodnessOfFit(
        mean,
        size,
        float(result.statistic),
        dof,
        float(result.pvalue),
        tuple(obs.tolist()),
        tuple(exp.tolist()),
        tuple(edges),
    )
