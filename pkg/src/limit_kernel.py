"""
Loi limite des vues locales p_{πω}, fonction de taux J₁ et contraction J_σ.

p_{πω}(a, ℓ) = π(a) · Π_b Poisson(ω(a,b)/π(a))(ℓ(b)), tronquée au cap L par
coordonnée. J₁ est l'entropie relative à p⊗p sur les mesures dont les deux
marginales sont consistantes et de loi des couleurs π ; +∞ sinon.
"""

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Literal, Sequence

import numpy as np
from scipy import optimize, special, stats

from src.distortion import DistortionFn
from src.empirical import (
    DEFAULT_CAP,
    LocalView,
    Measure,
    TypePair,
    psi,
    total_variation,
)
from src.logger import get_logger

logger = get_logger(__name__)

TailMode = Literal["drop", "renormalize", "saturate"]
TAIL_MODES = ("drop", "renormalize", "saturate")

DEFAULT_TRUNCATION_TOL = 1e-10
GATE_TOL = 1e-9
# Résidu maximal des contraintes au point dual pour déclarer t atteignable
FEASIBILITY_TOL = 1e-6
# Atomes au plus dans les tables σ(x, y) sur paires d'atomes (N×N flottants)
MAX_PAIRWISE_ATOMS = 6000


# ------------------------------------------------------------------------
# Masses ponctuelles
# ------------------------------------------------------------------------

def _intensities(a: int, tp: TypePair) -> np.ndarray:
    """c_b = ω(a,b)/π(a) ; erreur si π(a) = 0 avec ω(a,·) non nul."""
    row = tp.omega[a]
    if tp.pi[a] == 0.0:
        if np.any(row > 0):
            raise ValueError(f"Intensity undefined for null color {a}: pi(a)=0 with omega(a,.)>0")
        return np.zeros_like(row)
    return row / tp.pi[a]


def p_mass(a: int, l: Sequence[int], tp: TypePair) -> float:
    """
    p_{πω}(a, ℓ), évaluée en log.

    Raises:
        ValueError: π(a) = 0 avec ω(a,b) > 0
    """
    if len(l) != tp.k:
        raise ValueError(f"Count vector has length {len(l)}, expected {tp.k}")
    c = _intensities(a, tp)
    if tp.pi[a] == 0.0:
        return 0.0
    log_mass = math.log(tp.pi[a]) + float(np.sum(stats.poisson.logpmf(np.asarray(l), c)))
    return math.exp(log_mass)


def product_mass(vx: LocalView, vy: LocalView, tp: TypePair) -> float:
    """p_{πω}(vx) · p_{πω}(vy)."""
    return p_mass(vx.color, vx.counts, tp) * p_mass(vy.color, vy.counts, tp)


# ------------------------------------------------------------------------
# Noyau tabulé
# ------------------------------------------------------------------------

class PoissonFiberKernel:
    """
    Table de p_{πω} sur le support tronqué {(a, ℓ) : ℓ ∈ {0..L}^k}.

    Modes de queue :
        drop        masses brutes, le déficit 1 − total est rapporté
        renormalize masses brutes divisées par leur total
        saturate    la queue P(N ≥ L) est repliée sur ℓ(b) = L (mêmes vues que local_views)
    """

    def __init__(
        self,
        type_pair: TypePair,
        cap: int = DEFAULT_CAP,
        tail: TailMode = "saturate",
        truncation_tol: float = DEFAULT_TRUNCATION_TOL,
    ):
        if cap < 1:
            raise ValueError(f"Truncation cap must be >= 1, got {cap}")
        if tail not in TAIL_MODES:
            raise ValueError(f"Unknown tail mode: {tail}")
        self.type_pair = type_pair
        self.cap = cap
        self.tail = tail
        self.truncation_tol = truncation_tol

        k = type_pair.k
        grid = np.array(list(itertools.product(range(cap + 1), repeat=k)), dtype=np.int64)
        blocks, raw_blocks = [], []
        for a in range(k):
            c = _intensities(a, type_pair)
            if type_pair.pi[a] == 0.0:
                blocks.append(np.zeros(len(grid)))
                raw_blocks.append(np.zeros(len(grid)))
                continue
            logpmf = stats.poisson.logpmf(grid, c[None, :])
            raw = type_pair.pi[a] * np.exp(logpmf.sum(axis=1))
            raw_blocks.append(raw)
            if tail == "saturate":
                logpmf = np.where(grid == cap, stats.poisson.logsf(cap - 1, c)[None, :], logpmf)
                blocks.append(type_pair.pi[a] * np.exp(logpmf.sum(axis=1)))
            else:
                blocks.append(raw)

        self.colors = np.repeat(np.arange(k, dtype=np.int64), len(grid))
        self.counts = np.tile(grid, (k, 1))
        masses = np.concatenate(blocks)
        self.deficit = max(0.0, 1.0 - math.fsum(np.concatenate(raw_blocks).tolist()))
        if tail == "renormalize":
            masses = masses / math.fsum(masses.tolist())
        self.masses = masses
        for arr in (self.colors, self.counts, self.masses):
            arr.setflags(write=False)

        if self.deficit > truncation_tol:
            logger.warning(
                "kernel_truncation_deficit",
                cap=cap,
                deficit=self.deficit,
                tolerance=truncation_tol,
                tail=tail,
            )

    @classmethod
    def from_arrays(cls, pi, omega, cap: int = DEFAULT_CAP, tail: TailMode = "saturate"):
        return cls(TypePair(np.asarray(pi, dtype=float), np.asarray(omega, dtype=float)), cap, tail)

    def __len__(self) -> int:
        return len(self.masses)

    @property
    def k(self) -> int:
        return self.type_pair.k

    @property
    def total(self) -> float:
        return math.fsum(self.masses.tolist())

    @property
    def probabilities(self) -> np.ndarray:
        """Masses normalisées (identiques aux masses hors mode drop)."""
        if self.tail == "drop":
            return self.masses / self.total
        return self.masses

    @cached_property
    def views(self) -> list[LocalView]:
        return [
            LocalView(int(c), tuple(row))
            for c, row in zip(self.colors.tolist(), self.counts.tolist())
        ]

    @cached_property
    def _index(self) -> dict[LocalView, int]:
        return {v: i for i, v in enumerate(self.views)}

    def index_of(self, view: LocalView) -> int:
        try:
            return self._index[view]
        except KeyError:
            raise ValueError(f"View {view} is outside the truncated support (cap={self.cap})") from None

    def mass(self, view: LocalView) -> float:
        return float(self.masses[self.index_of(view)])

    def pruned_support(self, max_atoms: int = MAX_PAIRWISE_ATOMS) -> tuple[np.ndarray, np.ndarray]:
        """
        Atomes retenus pour les calculs sur paires d'atomes.

        Les atomes les plus légers sont écartés tant que leur masse cumulée reste
        ≤ truncation_tol ; les probabilités retenues sont alors renormalisées.

        Returns:
            (indices retenus, probabilités sur ces indices)

        Raises:
            ValueError: plus de max_atoms atomes retenus
        """
        p = self.probabilities
        order = np.argsort(p, kind="stable")
        dropped = order[np.cumsum(p[order]) <= self.truncation_tol]
        mask = p > 0
        mask[dropped] = False
        keep = np.flatnonzero(mask)
        if len(keep) > max_atoms:
            raise ValueError(
                f"Truncated support too large for pairwise tables: {len(keep)} atoms "
                f"(limit {max_atoms}, k={self.k}, cap={self.cap}); lower distortion.cap"
            )
        weights = p[keep]
        pruned_mass = math.fsum(p[dropped].tolist())
        if pruned_mass > 0.0:
            weights = weights / math.fsum(weights.tolist())
        logger.debug(
            "kernel_support_pruned", atoms=len(p), kept=len(keep), pruned_mass=pruned_mass
        )
        return keep, weights

    def as_measure(self) -> Measure:
        """p_{πω} comme Measure sur les vues (probabilité sauf en mode drop)."""
        return Measure(self.views, self.masses, probability=self.tail != "drop")

    def product_measure(self) -> Measure:
        """p⊗p comme Measure sur les paires de vues (support positif uniquement)."""
        keep = np.flatnonzero(self.masses > 0)
        views = self.views
        support = [(views[i], views[j]) for i in keep for j in keep]
        weights = np.outer(self.masses[keep], self.masses[keep]).reshape(-1)
        return Measure(support, weights, probability=self.tail != "drop")

    def __repr__(self) -> str:
        return f"PoissonFiberKernel(k={self.k}, cap={self.cap}, tail={self.tail!r}, atoms={len(self)})"


# ------------------------------------------------------------------------
# Entropie relative et fonction de taux
# ------------------------------------------------------------------------

def relative_entropy(mu: Measure, nu: Measure) -> float:
    """
    H(μ ‖ ν) = Σ μ log(μ/ν), 0·log 0 = 0 ; +∞ si μ charge un atome ν-nul.

    Raises:
        ValueError: μ charge un atome absent du support de ν
    """
    mu_w, nu_w = [], []
    for atom, w in mu.items():
        if w == 0.0:
            continue
        if atom not in nu:
            raise ValueError(f"Support mismatch: atom {atom!r} is not in the reference support")
        mu_w.append(w)
        nu_w.append(nu.weight(atom))
    if not mu_w:
        return 0.0
    terms = special.rel_entr(np.asarray(mu_w), np.asarray(nu_w))
    if np.any(np.isinf(terms)):
        return math.inf
    return max(0.0, math.fsum(terms.tolist()))


def _marginal_gate(marginal: Measure, pi: np.ndarray, tol: float) -> bool:
    tp = psi(marginal)
    return tp.is_consistent(tol) and bool(np.max(np.abs(tp.pi - pi)) <= tol)


def rate_J1(
    mu: Measure,
    tp: TypePair,
    *,
    kernel: PoissonFiberKernel | None = None,
    cap: int = DEFAULT_CAP,
    tol: float = GATE_TOL,
) -> float:
    """
    J₁(μ) = H(μ ‖ p_{πω} ⊗ p_{πω}) si μ₁, μ₂ sont consistantes de loi des couleurs π,
    +∞ sinon.
    """
    if not _marginal_gate(mu.marginal(0), tp.pi, tol) or not _marginal_gate(
        mu.marginal(1), tp.pi, tol
    ):
        return math.inf

    kernel = kernel or PoissonFiberKernel(tp, cap)
    p = kernel.probabilities
    mu_w, ref_w = [], []
    for (vx, vy), w in mu.items():
        if w == 0.0:
            continue
        mu_w.append(w)
        ref_w.append(p[kernel.index_of(vx)] * p[kernel.index_of(vy)])
    terms = special.rel_entr(np.asarray(mu_w), np.asarray(ref_w))
    if np.any(np.isinf(terms)):
        return math.inf
    return max(0.0, math.fsum(terms.tolist()))


# ------------------------------------------------------------------------
# Contraction J_σ(t) = inf { J₁(μ) : ⟨σ, μ⟩ = t }
# ------------------------------------------------------------------------

@dataclass(frozen=True)
class _DualProblem:
    """
    Projection entropique de ν = p⊗p sur {E_μ F = 0}.

    F(x, y) = (σ(x,y) − t, f(x), f(y)) où f regroupe les écarts de loi des couleurs
    et l'antisymétrie de l'image Ψ. La valeur est −min_θ log E_ν exp(θ·F).
    """

    log_p: np.ndarray
    centered_sigma: np.ndarray
    side_features: np.ndarray

    @property
    def dim(self) -> int:
        return 1 + 2 * self.side_features.shape[1]

    def _exponent(self, theta: np.ndarray) -> np.ndarray:
        m = self.side_features.shape[1]
        gx = self.side_features @ theta[1 : 1 + m]
        gy = self.side_features @ theta[1 + m :]
        return (
            self.log_p[:, None]
            + self.log_p[None, :]
            + theta[0] * self.centered_sigma
            + gx[:, None]
            + gy[None, :]
        )

    def objective(self, theta: np.ndarray) -> tuple[float, np.ndarray]:
        """log E_ν e^{θ·F} et son gradient E_{μ_θ} F."""
        z = self._exponent(theta)
        value = special.logsumexp(z)
        weights = np.exp(z - value)
        mu_x = weights.sum(axis=1)
        mu_y = weights.sum(axis=0)
        grad = np.concatenate(
            [
                [np.sum(weights * self.centered_sigma)],
                self.side_features.T @ mu_x,
                self.side_features.T @ mu_y,
            ]
        )
        return float(value), grad


def _side_features(kernel: PoissonFiberKernel) -> np.ndarray:
    """Fonctions f(x) dont la μ-moyenne doit s'annuler sur chaque marginale."""
    k = kernel.k
    onehot = (kernel.colors[:, None] == np.arange(k)[None, :]).astype(float)
    columns = [onehot[:, a] - kernel.type_pair.pi[a] for a in range(k - 1)]
    for a, b in itertools.combinations(range(k), 2):
        columns.append(onehot[:, a] * kernel.counts[:, b] - onehot[:, b] * kernel.counts[:, a])
    if not columns:
        return np.zeros((len(kernel.masses), 0))
    return np.column_stack(columns)


def _dual_problem(
    t: float, sigma_matrix: np.ndarray, kernel: PoissonFiberKernel, keep: np.ndarray, p: np.ndarray
):
    return _DualProblem(
        log_p=np.log(p),
        centered_sigma=sigma_matrix - t,
        side_features=_side_features(kernel)[keep],
    )


def contract_J_sigma(
    t: float,
    sigma: DistortionFn,
    tp: TypePair,
    *,
    kernel: PoissonFiberKernel | None = None,
    cap: int | None = None,
    t_max: float = 200.0,
) -> float:
    """
    J_σ(t) par dualité convexe sur le support tronqué.

    Un basculement exponentiel sur σ seul est essayé d'abord ; si les contraintes
    de marginales ou de consistance restent violées, le dual complet est résolu
    par L-BFGS-B. +∞ si t est hors de l'image de σ ou si les contraintes ne
    peuvent être satisfaites.
    """
    kernel = kernel or PoissonFiberKernel(tp, cap or sigma.cap)
    keep, p = kernel.pruned_support()
    sigma_matrix = sigma.pairwise(kernel.colors[keep], kernel.counts[keep])

    lo, hi = float(sigma_matrix.min()), float(sigma_matrix.max())
    if t < lo - 1e-12 or t > hi + 1e-12:
        return math.inf

    problem = _dual_problem(t, sigma_matrix, kernel, keep, p)
    theta = np.zeros(problem.dim)

    if hi > lo:
        scalar = optimize.minimize_scalar(
            lambda s: problem.objective(np.concatenate([[s], theta[1:]]))[0],
            bounds=(-t_max, t_max),
            method="bounded",
            options={"xatol": 1e-12},
        )
        theta[0] = scalar.x

    value, grad = problem.objective(theta)
    residual = float(np.max(np.abs(grad)))
    if residual > FEASIBILITY_TOL and problem.dim > 1:
        result = optimize.minimize(
            problem.objective,
            theta,
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": 2000, "ftol": 1e-15, "gtol": 1e-10},
        )
        theta = result.x
        value, grad = problem.objective(theta)
        residual = float(np.max(np.abs(grad)))
        logger.debug("j_sigma_dual_solved", t=t, iterations=result.nit, residual=residual)

    if residual > FEASIBILITY_TOL:
        logger.debug("j_sigma_infeasible", t=t, residual=residual)
        return math.inf
    return max(0.0, -value)


# ------------------------------------------------------------------------
# Écart à la loi limite
# ------------------------------------------------------------------------

@dataclass(frozen=True)
class SllnDeviation:
    """Écarts d'une mesure empirique à la loi limite (norme sup et variation totale)."""

    sup_norm: float
    total_variation: float


def slln_deviation(mu: Measure, kernel: PoissonFiberKernel) -> SllnDeviation:
    """
    Compare L_{n,1} à p_{πω} (atomes LocalView) ou L_n jointe à p⊗p (atomes paires).
    """
    if len(mu) == 0:
        raise ValueError("Empty measure")
    p = kernel.probabilities
    if isinstance(mu.support[0], LocalView):
        diff = p.copy()
        for view, w in mu.items():
            diff[kernel.index_of(view)] -= w
        reference = Measure(kernel.views, p)
        return SllnDeviation(float(np.max(np.abs(diff))), total_variation(mu, reference))

    if len(p) > MAX_PAIRWISE_ATOMS:
        raise ValueError(f"Truncated support too large for the joint comparison: {len(p)} atoms")
    diff = np.outer(p, p)
    for (vx, vy), w in mu.items():
        diff[kernel.index_of(vx), kernel.index_of(vy)] -= w
    return SllnDeviation(float(np.max(np.abs(diff))), 0.5 * math.fsum(np.abs(diff).reshape(-1).tolist()))
