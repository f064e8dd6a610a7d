"""
Numérique de l'AEP avec perte : cumulants H_n et limite à une lettre Λ,
transformées de Legendre, bornes α_min / α_av, fonction débit-distorsion R
et estimation Monte Carlo des exposants de boules de distorsion.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np
from scipy import optimize, special, stats

from src.cgrg_core import (
    STREAM_X,
    STREAM_Y,
    GeometricSkeleton,
    NeighborMethod,
    check_radii,
    make_rng,
    neighbor_color_counts,
    radius_matrix,
    sample_colors,
    sample_graph,
)
from src.config_loader import ModelParams
from src.distortion import DistortionFn
from src.limit_kernel import PoissonFiberKernel
from src.logger import get_logger

logger = get_logger(__name__)

DEFAULT_T_MAX = 200.0
DERIVATIVE_STEP = 1e-5
CONVEXITY_TOL = 1e-8

LegendreSide = Literal["full", "nonpositive"]


# ------------------------------------------------------------------------
# Fonctions cumulantes
# ------------------------------------------------------------------------

@dataclass(frozen=True)
class CumulantFn:
    """
    Fonction cumulante, sous forme d'appelable (Λ exacte, H_n/n Monte Carlo)
    et/ou de grille (t, valeur, erreur type).
    """

    kind: Literal["single_letter", "empirical_n"]
    ts: tuple[float, ...] = ()
    values: tuple[float, ...] = ()
    stderrs: tuple[float, ...] = ()
    n: int | None = None
    fn: Callable[[float], float] | None = field(default=None, repr=False, compare=False)
    derivative: Callable[[float], float] | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if len(self.values) != len(self.ts):
            raise ValueError("Cumulant grid needs one value per t")
        if list(self.ts) != sorted(self.ts):
            raise ValueError("Cumulant grid t values must be sorted ascending")

    def __call__(self, t: float) -> float:
        if self.fn is None:
            raise ValueError("Grid-only cumulant cannot be evaluated off-grid")
        return self.fn(t)

    def slope(self, t: float) -> float:
        """Λ′(t), analytique si disponible, sinon différence centrée (h = 1e-5)."""
        if self.derivative is not None:
            return self.derivative(t)
        h = DERIVATIVE_STEP
        return (self(t + h) - self(t - h)) / (2 * h)

    @property
    def convex(self) -> bool:
        """Pentes successives de la grille croissantes (à 1e-8 près)."""
        if len(self.ts) < 3:
            return True
        t = np.asarray(self.ts)
        v = np.asarray(self.values)
        slopes = np.diff(v) / np.diff(t)
        return bool(np.all(np.diff(slopes) >= -CONVEXITY_TOL))

    def rows(self) -> list[tuple[float, float, float]]:
        stderrs = self.stderrs or (0.0,) * len(self.ts)
        return list(zip(self.ts, self.values, stderrs))


class SingleLetterProblem:
    """
    Problème à une lettre sur le support tronqué d'un noyau :
    Λ(t) = Σ_x p(x) log Σ_y p(y) e^{tσ(x,y)}.

    Les atomes de masse cumulée ≤ truncation_tol du noyau sont écartés.
    """

    def __init__(self, sigma: DistortionFn, kernel: PoissonFiberKernel):
        if sigma.k != kernel.k:
            raise ValueError("Distortion and kernel use different alphabets")
        keep, p = kernel.pruned_support()
        self.sigma = sigma
        self.kernel = kernel
        self.p = p
        self.matrix = sigma.pairwise(kernel.colors[keep], kernel.counts[keep])

    def _row_cumulants(self, t: float) -> np.ndarray:
        return special.logsumexp(t * self.matrix, b=self.p[None, :], axis=1)

    def cumulant(self, t: float) -> float:
        if t == 0.0:
            return 0.0
        return math.fsum((self.p * self._row_cumulants(t)).tolist())

    def conditional(self, t: float) -> np.ndarray:
        """q_t(y|x) ∝ p(y) e^{tσ(x,y)}, une ligne par x."""
        z = t * self.matrix + np.log(self.p)[None, :]
        return np.exp(z - special.logsumexp(z, axis=1, keepdims=True))

    def derivative(self, t: float) -> float:
        q = self.conditional(t)
        return math.fsum((self.p * np.sum(q * self.matrix, axis=1)).tolist())

    @property
    def alpha_av(self) -> float:
        """⟨σ, p⊗p⟩ = Λ′(0)."""
        return math.fsum((self.p * (self.matrix @ self.p)).tolist())

    @property
    def alpha_min_limit(self) -> float:
        """Σ_x p(x) min_y σ(x,y) = lim_{t→−∞} Λ(t)/t."""
        return math.fsum((self.p * self.matrix.min(axis=1)).tolist())

    def cumulant_fn(self, ts: Sequence[float] = ()) -> CumulantFn:
        ts = tuple(float(t) for t in ts)
        return CumulantFn(
            kind="single_letter",
            ts=ts,
            values=tuple(self.cumulant(t) for t in ts),
            stderrs=(0.0,) * len(ts),
            fn=self.cumulant,
            derivative=self.derivative,
        )


def single_letter_cumulant(t: float, sigma: DistortionFn, kernel: PoissonFiberKernel) -> float:
    """Λ(t) en log-sum-exp."""
    return SingleLetterProblem(sigma, kernel).cumulant(t)


def alpha_min_limit(sigma: DistortionFn, kernel: PoissonFiberKernel) -> float:
    return SingleLetterProblem(sigma, kernel).alpha_min_limit


# ------------------------------------------------------------------------
# Transformée de Legendre
# ------------------------------------------------------------------------

def legendre(
    cumulant: CumulantFn,
    alpha: float,
    *,
    side: LegendreSide = "full",
    t_max: float = DEFAULT_T_MAX,
) -> float:
    """
    sup_t [tα − Λ(t)], ou sup_{t ≤ 0} avec side="nonpositive" (débit-distorsion).

    Le crochet est élargi par doublement jusqu'au changement de signe de la dérivée
    ou |t| = t_max ; la recherche finale est une minimisation bornée (Brent).
    +∞ si l'objectif croît encore linéairement en t_max.

    Raises:
        ValueError: grille non convexe, ou cumulant sans appelable ni grille
    """
    if not cumulant.convex:
        raise ValueError("Legendre transform needs a convex cumulant grid")

    if cumulant.fn is None:
        if not cumulant.ts:
            raise ValueError("Empty cumulant")
        t = np.asarray(cumulant.ts)
        v = np.asarray(cumulant.values)
        if side == "nonpositive":
            mask = t <= 0
            t, v = t[mask], v[mask]
        return max(0.0, float(np.max(t * alpha - v))) if len(t) else 0.0

    def objective(t: float) -> float:
        return t * alpha - cumulant(t)

    def gradient(t: float) -> float:
        return alpha - cumulant.slope(t)

    g0 = gradient(0.0)
    if g0 == 0.0 or (side == "nonpositive" and g0 > 0.0):
        return max(0.0, objective(0.0))

    direction = 1.0 if g0 > 0 else -1.0
    near, far = 0.0, direction
    while direction * gradient(far) > 0 and abs(far) < t_max:
        near = far
        far = direction * min(2 * abs(far), t_max)

    edge_slope = direction * gradient(far)
    if edge_slope > 0:
        slope_tol = 1e-7 * (1.0 + abs(alpha))
        if edge_slope > slope_tol:
            return math.inf
        return max(0.0, objective(far))

    lo, hi = sorted((near, far))
    result = optimize.minimize_scalar(
        lambda t: -objective(t),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-12},
    )
    best = max(-float(result.fun), objective(lo), objective(hi))
    return max(0.0, best)


# ------------------------------------------------------------------------
# Échantillons Monte Carlo de σ⁽ⁿ⁾
# ------------------------------------------------------------------------

@dataclass(frozen=True)
class DistortionSamples:
    """Matrice M × K de σ⁽ⁿ⁾(x_m, y_{m,k}) ; réutilisée pour tous les t et α."""

    values: np.ndarray
    n: int

    @property
    def outer(self) -> int:
        return self.values.shape[0]

    @property
    def inner(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class _OuterDraw:
    colors: np.ndarray
    counts: np.ndarray
    edges: np.ndarray
    skeleton: GeometricSkeleton | None


def _draw_outer(
    params_x: ModelParams,
    params_y: ModelParams,
    sigma: DistortionFn,
    outer: int,
    shared_geometry: bool,
    method: NeighborMethod,
) -> _OuterDraw:
    gx = sample_graph(params_x, outer, method=method, stream=STREAM_X)
    skeleton = None
    if sigma.needs_counts and not shared_geometry:
        radii_y = radius_matrix(params_y)
        skeleton = GeometricSkeleton.build(gx.points, float(radii_y.max()), method)
    return _OuterDraw(gx.colors, np.minimum(gx.color_counts, sigma.cap), gx.edges, skeleton)


def _inner_distortions(
    draw: _OuterDraw,
    params_y: ModelParams,
    sigma: DistortionFn,
    outer: int,
    inner: range,
) -> np.ndarray:
    """σ⁽ⁿ⁾(x, y_j) pour les tirages internes j ∈ inner (graine (seed, Y, outer, j))."""
    n, k = params_y.n, params_y.k
    radii_y = radius_matrix(params_y)
    out = np.empty(len(inner))
    empty_counts = np.zeros((n, k), dtype=np.int64)
    for i, j in enumerate(inner):
        colors_y = sample_colors(params_y, make_rng(params_y.seed, STREAM_Y, outer, j))
        if sigma.needs_counts:
            edges_y = draw.edges if draw.skeleton is None else draw.skeleton.edges_for(colors_y, radii_y)
            counts_y = np.minimum(neighbor_color_counts(n, k, edges_y, colors_y), sigma.cap)
        else:
            counts_y = empty_counts
        per_vertex = sigma.evaluate(draw.colors, draw.counts, colors_y, counts_y)
        out[i] = math.fsum(per_vertex.tolist()) / n
    return out


def _check_coupling(params_x: ModelParams, params_y: ModelParams) -> None:
    if (params_x.n, params_x.d, params_x.alphabet) != (params_y.n, params_y.d, params_y.alphabet):
        raise ValueError("Coupled processes must share n, d and the alphabet")
    check_radii(radius_matrix(params_y))


def sample_distortions(
    sigma: DistortionFn,
    params: ModelParams,
    outer: int,
    inner: int,
    *,
    params_y: ModelParams | None = None,
    shared_geometry: bool = False,
    threads: int = 1,
    method: NeighborMethod = "kdtree",
) -> DistortionSamples:
    """
    Tire M graphes x et, pour chacun, K graphes y sur les mêmes positions.

    Chaque tirage a sa propre graine (seed, flux, m, k) : le résultat ne dépend
    pas du nombre de threads.

    Raises:
        ValueError: M ou K nul, couplage incohérent
    """
    if outer < 1 or inner < 1:
        raise ValueError(f"Need at least one outer and one inner sample, got M={outer}, K={inner}")
    params_y = params_y or params
    _check_coupling(params, params_y)

    def row(m: int) -> np.ndarray:
        draw = _draw_outer(params, params_y, sigma, m, shared_geometry, method)
        return _inner_distortions(draw, params_y, sigma, m, range(inner))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(row, range(outer)))
    else:
        rows = [row(m) for m in range(outer)]

    values = np.vstack(rows)
    values.setflags(write=False)
    logger.info(
        "distortions_sampled",
        n=params.n,
        outer=outer,
        inner=inner,
        kind=sigma.kind,
        mean=float(values.mean()),
    )
    return DistortionSamples(values, params.n)


# ------------------------------------------------------------------------
# Cumulant empirique
# ------------------------------------------------------------------------

@dataclass(frozen=True)
class CumulantEstimate:
    t: float
    value: float
    stderr: float
    n: int
    outer: int
    inner: int


def _row_log_mean_exp(samples: DistortionSamples, t: float) -> np.ndarray:
    """(1/n) log moyenne_k exp(n t σ_mk) par ligne, décalée par le max (exacte si σ constante)."""
    scaled = t * samples.values
    shift = scaled.max(axis=1)
    centered = samples.n * (scaled - shift[:, None])
    return shift + (special.logsumexp(centered, axis=1) - math.log(samples.inner)) / samples.n


def _jackknife_stderr(values: np.ndarray) -> float:
    m = len(values)
    if m < 2:
        return math.inf
    mean = math.fsum(values.tolist()) / m
    leave_one_out = (m * mean - values) / (m - 1)
    return math.sqrt((m - 1) / m * math.fsum(((leave_one_out - mean) ** 2).tolist()))


def cumulant_from_samples(samples: DistortionSamples, t: float) -> CumulantEstimate:
    """(1/n) H_n(nt) estimé à partir d'une matrice d'échantillons."""
    if t == 0.0:
        per_row = np.zeros(samples.outer)
    else:
        per_row = _row_log_mean_exp(samples, t)
    value = math.fsum(per_row.tolist()) / samples.outer
    return CumulantEstimate(
        float(t), value, _jackknife_stderr(per_row), samples.n, samples.outer, samples.inner
    )


def empirical_cumulant(
    t: float,
    sigma: DistortionFn,
    params: ModelParams,
    reps: tuple[int, int],
    **sampling,
) -> CumulantEstimate:
    """
    (1/n)·moyenne sur M graphes x du log-moyenne-exp sur K graphes y de e^{n t σ⁽ⁿ⁾}.

    Args:
        reps: (M, K)
        sampling: options de sample_distortions (params_y, threads, shared_geometry...)
    """
    outer, inner = reps
    samples = sample_distortions(sigma, params, outer, inner, **sampling)
    return cumulant_from_samples(samples, t)


def cumulant_grid(
    ts: Sequence[float],
    *,
    problem: SingleLetterProblem | None = None,
    samples: DistortionSamples | None = None,
) -> CumulantFn:
    """Λ sur une grille (problème à une lettre) ou H_n/n (échantillons)."""
    ts = sorted(float(t) for t in ts)
    if (problem is None) == (samples is None):
        raise ValueError("Give exactly one of problem or samples")
    if problem is not None:
        return problem.cumulant_fn(ts)

    estimates = [cumulant_from_samples(samples, t) for t in ts]
    return CumulantFn(
        kind="empirical_n",
        ts=tuple(ts),
        values=tuple(e.value for e in estimates),
        stderrs=tuple(e.stderr for e in estimates),
        n=samples.n,
        fn=lambda t: cumulant_from_samples(samples, t).value,
    )


# ------------------------------------------------------------------------
# Bornes α_min / α_av
# ------------------------------------------------------------------------

@dataclass(frozen=True)
class AlphaBrackets:
    """α_min Monte Carlo (avec diagnostic de biais K/2 → K), α_av et α_min limite."""

    alpha_min: float
    alpha_min_stderr: float
    alpha_min_half: float
    alpha_av: float
    alpha_min_limit: float

    @property
    def bias(self) -> float:
        """Variation de l'estimateur quand K double (négative : biais vers le bas)."""
        return self.alpha_min - self.alpha_min_half

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.alpha_min + self.alpha_av)


def alpha_min_from_samples(samples: DistortionSamples, inner: int | None = None) -> tuple[float, float]:
    """Moyenne sur x du minimum de σ⁽ⁿ⁾ sur les K premiers y, et son erreur type."""
    block = samples.values[:, : inner or samples.inner]
    minima = block.min(axis=1)
    return math.fsum(minima.tolist()) / len(minima), _jackknife_stderr(minima)


def alpha_brackets(
    sigma: DistortionFn,
    kernel: PoissonFiberKernel,
    params: ModelParams,
    reps: tuple[int, int],
    *,
    samples: DistortionSamples | None = None,
    **sampling,
) -> AlphaBrackets:
    """(α_min, α_av) : α_min par minima Monte Carlo, α_av = ⟨σ, p⊗p⟩."""
    if samples is None:
        samples = sample_distortions(sigma, params, reps[0], reps[1], **sampling)
    problem = SingleLetterProblem(sigma, kernel)
    a_min, a_err = alpha_min_from_samples(samples)
    half, _ = alpha_min_from_samples(samples, max(1, samples.inner // 2))
    brackets = AlphaBrackets(a_min, a_err, half, problem.alpha_av, problem.alpha_min_limit)
    logger.info(
        "alpha_brackets",
        alpha_min=a_min,
        alpha_min_bias=brackets.bias,
        alpha_av=brackets.alpha_av,
        alpha_min_limit=brackets.alpha_min_limit,
    )
    return brackets


# ------------------------------------------------------------------------
# Exposant de boule Monte Carlo
# ------------------------------------------------------------------------

@dataclass(frozen=True)
class BallExponent:
    """−(1/n) log Q(B(x, α)) et l'intervalle de Clopper–Pearson associé."""

    alpha: float
    n: int
    hits: int
    trials: int
    estimate: float
    ci_low: float
    ci_high: float

    @property
    def hit_fraction(self) -> float:
        return self.hits / self.trials


def _exponent(fraction: float, n: int) -> float:
    if fraction <= 0.0:
        return math.inf
    return max(0.0, -math.log(fraction) / n)


def ball_exponent_from_hits(
    hits: int, trials: int, n: int, alpha: float, confidence: float = 0.95
) -> BallExponent:
    if trials < 1:
        raise ValueError("Ball exponent needs K >= 1 inner samples")
    interval = stats.binomtest(hits, trials).proportion_ci(confidence_level=confidence, method="exact")
    return BallExponent(
        alpha=alpha,
        n=n,
        hits=hits,
        trials=trials,
        estimate=_exponent(hits / trials, n),
        ci_low=_exponent(float(interval.high), n),
        ci_high=_exponent(float(interval.low), n),
    )


def mc_ball_exponent(
    params: ModelParams,
    sigma: DistortionFn,
    alpha: float,
    n: int | None = None,
    inner: int = 100_000,
    *,
    replicate: int = 0,
    params_y: ModelParams | None = None,
    shared_geometry: bool = False,
    threads: int = 1,
    confidence: float = 0.95,
    method: NeighborMethod = "kdtree",
) -> BallExponent:
    """
    Un graphe x, K graphes y indépendants ; exposant −(1/n) log(fraction dans B(x, α)).

    Raises:
        ValueError: K = 0 ou α < 0
    """
    if inner < 1:
        raise ValueError("Ball exponent needs K >= 1 inner samples")
    if alpha < 0:
        raise ValueError(f"alpha must be nonnegative, got {alpha}")
    if n is not None and n != params.n:
        params = params.with_updates(n=n)
        if params_y is not None:
            params_y = params_y.with_updates(n=n)
    params_y = params_y or params
    _check_coupling(params, params_y)

    draw = _draw_outer(params, params_y, sigma, replicate, shared_geometry, method)
    chunks = [c for c in np.array_split(np.arange(inner), max(1, threads)) if len(c)]
    ranges = [range(int(c[0]), int(c[-1]) + 1) for c in chunks]

    def count(block: range) -> int:
        return int(np.count_nonzero(_inner_distortions(draw, params_y, sigma, replicate, block) <= alpha))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            hits = sum(pool.map(count, ranges))
    else:
        hits = sum(count(r) for r in ranges)

    result = ball_exponent_from_hits(hits, inner, params.n, alpha, confidence)
    if hits == 0:
        logger.warning("ball_zero_hits", alpha=alpha, n=params.n, inner=inner)
    logger.info(
        "ball_exponent_estimated",
        alpha=alpha,
        n=params.n,
        hits=hits,
        inner=inner,
        estimate=result.estimate,
    )
    return result


# ------------------------------------------------------------------------
# Courbe débit-distorsion
# ------------------------------------------------------------------------

@dataclass(frozen=True)
class RDCurve:
    alphas: tuple[float, ...]
    r_values: tuple[float, ...]
    alpha_min: float
    alpha_av: float
    alpha_min_limit: float
    alpha_min_inf_flag: bool | None = None
    stderrs: tuple[float, ...] = ()

    def rows(self) -> list[tuple[float, float, float]]:
        stderrs = self.stderrs or (0.0,) * len(self.alphas)
        return list(zip(self.alphas, self.r_values, stderrs))


def rd_curve(
    sigma: DistortionFn,
    kernel: PoissonFiberKernel,
    alphas: Sequence[float],
    *,
    brackets: AlphaBrackets | None = None,
    diagnostic: "AlphaMinInfDiagnostic | None" = None,
    t_max: float = DEFAULT_T_MAX,
) -> RDCurve:
    """
    R(α) = sup_{t ≤ 0} [tα − Λ(t)] sur la grille ; +∞ sous α_min, 0 au-delà de α_av.

    Raises:
        ValueError: grille non triée
    """
    alphas = [float(a) for a in alphas]
    if alphas != sorted(alphas):
        raise ValueError("alphas must be sorted ascending")
    problem = SingleLetterProblem(sigma, kernel)
    cumulant = problem.cumulant_fn()
    values = tuple(legendre(cumulant, a, side="nonpositive", t_max=t_max) for a in alphas)
    curve = RDCurve(
        alphas=tuple(alphas),
        r_values=values,
        alpha_min=brackets.alpha_min if brackets else problem.alpha_min_limit,
        alpha_av=problem.alpha_av,
        alpha_min_limit=problem.alpha_min_limit,
        alpha_min_inf_flag=diagnostic.flag if diagnostic else None,
    )
    logger.info("rd_curve_computed", points=len(alphas), alpha_av=curve.alpha_av)
    return curve


def default_alpha_grid(sigma: DistortionFn, kernel: PoissonFiberKernel, points: int) -> list[float]:
    """Grille régulière de 0 à 1,25·α_av (couvre la zone +∞ et la zone nulle)."""
    upper = 1.25 * SingleLetterProblem(sigma, kernel).alpha_av
    return np.linspace(0.0, upper if upper > 0 else 1.0, points).tolist()


def empirical_rate(
    samples: DistortionSamples, alpha: float, *, t_max: float = DEFAULT_T_MAX
) -> float:
    """R_n(α) = sup_{t ≤ 0} [tα − H_n(nt)/n] à partir des échantillons."""
    cumulant = CumulantFn(
        kind="empirical_n",
        n=samples.n,
        fn=lambda t: cumulant_from_samples(samples, t).value,
    )
    return legendre(cumulant, alpha, side="nonpositive", t_max=t_max)


@dataclass(frozen=True)
class AlphaMinInfDiagnostic:
    """Croissance de R_n(α) le long d'une échelle de n près de α_min."""

    alpha: float
    n_values: tuple[int, ...]
    rates: tuple[float, ...]
    flag: bool


def alpha_min_inf_diagnostic(
    sigma: DistortionFn,
    params: ModelParams,
    alpha: float,
    n_values: Sequence[int],
    reps: tuple[int, int],
    *,
    growth: float = 2.0,
    **sampling,
) -> AlphaMinInfDiagnostic:
    """
    Drapeau levé si R_n(α) est infini pour un n de l'échelle, ou s'il croît
    strictement le long de l'échelle d'un facteur au moins `growth`.
    """
    rates = []
    for n in n_values:
        samples = sample_distortions(sigma, params.with_updates(n=n), reps[0], reps[1], **sampling)
        rates.append(empirical_rate(samples, alpha))
    finite = [r for r in rates if math.isfinite(r)]
    increasing = all(b > a for a, b in zip(rates, rates[1:]))
    flag = any(math.isinf(r) for r in rates) or (
        len(finite) >= 2 and increasing and finite[0] > 0 and finite[-1] >= growth * finite[0]
    )
    logger.info("alpha_min_inf_diagnostic", alpha=alpha, rates=rates, flag=flag)
    return AlphaMinInfDiagnostic(float(alpha), tuple(int(n) for n in n_values), tuple(rates), flag)


def primal_rate(
    sigma: DistortionFn,
    kernel: PoissonFiberKernel,
    alpha: float,
    *,
    t_max: float = DEFAULT_T_MAX,
) -> float:
    """
    inf { H(μ ‖ p⊗p) : μ₁ = p, ⟨σ, μ⟩ ≤ α } résolu dans le primal : pour chaque x,
    q(·|x) ∝ p e^{θσ(x,·)}, θ ≤ 0 ajusté pour que la distorsion moyenne vaille α ;
    l'entropie est ensuite sommée atome par atome.
    """
    problem = SingleLetterProblem(sigma, kernel)
    if alpha >= problem.alpha_av:
        return 0.0
    if alpha < problem.alpha_min_limit - 1e-12:
        return math.inf

    if problem.derivative(-t_max) >= alpha:
        theta = -t_max
    else:
        theta = optimize.brentq(lambda s: problem.derivative(s) - alpha, -t_max, 0.0, xtol=1e-14)
    q = problem.conditional(theta)
    per_x = special.rel_entr(q, problem.p[None, :]).sum(axis=1)
    return max(0.0, math.fsum((problem.p * per_x).tolist()))
