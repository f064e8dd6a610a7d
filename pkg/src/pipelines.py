"""
Expériences exposées par la CLI. Chaque fonction reçoit la configuration
résolue et le répertoire de sortie, écrit ses artefacts et renvoie un RunResult.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from src.cgrg_core import sample_graph
from src.config_loader import ModelParams, RunConfig
from src.distortion import DistortionFn, distortion_from_config
from src.empirical import (
    TypePair,
    color_measure,
    empirical_measure,
    graph_type_pair,
    local_views,
    pair_measure,
    poisson_goodness_of_fit,
    sample_conditioned_graph,
    view_arrays,
)
from src.exporters import (
    load_distortion_table,
    write_graph,
    write_kernel,
    write_measure,
    write_type_pair,
)
from src.limit_kernel import PoissonFiberKernel, slln_deviation
from src.logger import get_logger
from src.rate_distortion import (
    SingleLetterProblem,
    alpha_brackets,
    alpha_min_inf_diagnostic,
    cumulant_grid,
    default_alpha_grid,
    legendre,
    mc_ball_exponent,
    rd_curve,
    sample_distortions,
)
from src.utils import resolve_output_path, write_csv_rows
from src.wsn_app import (
    dataset_from_graph,
    fit_from_dataset,
    fit_report,
    load_dataset,
    omega_limit,
    rd_step,
    write_dataset,
)

logger = get_logger(__name__)

# Taille d'échantillon des tests du χ² (les comptages de sommets voisins sont corrélés)
GOF_SAMPLE_SIZE = 500


@dataclass
class RunResult:
    outputs: list[str] = field(default_factory=list)
    metrics: dict[str, float | int | bool] = field(default_factory=dict)

    def add(self, name: str) -> str:
        self.outputs.append(name)
        return name


# ------------------------------------------------------------------------
# Aides communes
# ------------------------------------------------------------------------

def limit_type_pair(params: ModelParams) -> TypePair:
    """(π, ω^{Δ(d)}) du modèle."""
    return TypePair(params.pi_array(), omega_limit(params.lambda_array(), params.pi_array(), params.d))


def build_distortion(config: RunConfig) -> DistortionFn:
    table = None
    if config.distortion.kind == "table":
        table = load_distortion_table(config.distortion.table_path, config.model.alphabet)
    return distortion_from_config(config.distortion, config.model.k, table)


def _sampling_options(config: RunConfig) -> dict:
    return {
        "shared_geometry": config.sampling.shared_geometry,
        "threads": config.sampling.threads,
    }


def _draw_graph(config: RunConfig, params: ModelParams, replicate: int):
    """Graphe brut, ou conditionné souplement sur (π, ω) quand τ est configuré."""
    if config.sampling.tau is None:
        return sample_graph(params, replicate)
    graph, _ = sample_conditioned_graph(params, limit_type_pair(params), config.sampling.tau, replicate)
    return graph


def _path(out_dir: Path, name: str) -> Path:
    return resolve_output_path(out_dir, name)


# ------------------------------------------------------------------------
# Expériences
# ------------------------------------------------------------------------

def run_generate(config: RunConfig, out_dir: Path) -> RunResult:
    """Un graphe (réplique 0) et son type (π_n, ω_n)."""
    result = RunResult()
    graph = _draw_graph(config, config.model, 0)
    write_graph(graph, _path(out_dir, result.add("graph.txt")))
    write_type_pair(graph_type_pair(graph), _path(out_dir, result.add("type_pair.json")), graph.alphabet)
    result.metrics.update(n=graph.n, edges=graph.num_edges)
    return result


def run_stats(config: RunConfig, out_dir: Path) -> RunResult:
    """Mesures empiriques, intensités des paires sur les répliques, ajustement de Poisson."""
    result = RunResult()
    params = config.model
    cap = config.distortion.cap
    alphabet = params.alphabet
    target = limit_type_pair(params)

    graph = _draw_graph(config, params, 0)
    views = local_views(graph, cap)
    observed = graph_type_pair(graph)
    kernel = PoissonFiberKernel(observed, cap)
    write_measure(empirical_measure(views), _path(out_dir, result.add("views.csv")), alphabet)
    write_measure(pair_measure(graph), _path(out_dir, result.add("pairs.csv")), alphabet)
    write_measure(color_measure(graph), _path(out_dir, result.add("colors.csv")), alphabet)
    write_type_pair(observed, _path(out_dir, result.add("type_pair.json")), alphabet)
    write_kernel(kernel, _path(out_dir, result.add("kernel.csv")), alphabet)

    colors, counts = view_arrays(graph, cap)
    rng = np.random.default_rng(params.seed)
    fit_rows = []
    for a in range(params.k):
        if observed.pi[a] == 0:
            continue
        for b in range(params.k):
            mean = observed.omega[a, b] / observed.pi[a]
            test = poisson_goodness_of_fit(
                counts[colors == a, b], mean, sample_size=GOF_SAMPLE_SIZE, rng=rng
            )
            fit_rows.append(
                [alphabet[a], alphabet[b], mean, test.statistic, test.dof, test.p_value, test.passes()]
            )
    write_csv_rows(
        _path(out_dir, result.add("poisson_fit.csv")),
        ["a", "b", "mean", "statistic", "dof", "p_value", "passes"],
        fit_rows,
    )

    intensity_rows, rel_errors = [], []
    for r in range(config.sampling.replicates):
        omega_n = graph_type_pair(_draw_graph(config, params, r)).omega
        for a in range(params.k):
            for b in range(params.k):
                limit = target.omega[a, b]
                rel = abs(omega_n[a, b] - limit) / limit if limit > 0 else math.inf
                rel_errors.append(rel)
                intensity_rows.append([r, alphabet[a], alphabet[b], omega_n[a, b], limit, rel])
    write_csv_rows(
        _path(out_dir, result.add("intensity.csv")),
        ["replicate", "a", "b", "omega_n", "omega_limit", "rel_error"],
        intensity_rows,
    )

    result.metrics.update(
        tv_to_kernel=slln_deviation(empirical_measure(views), kernel).total_variation,
        median_rel_error=float(np.median(rel_errors)),
        poisson_fits_passed=sum(1 for row in fit_rows if row[-1]),
    )
    return result


def run_slln_check(config: RunConfig, out_dir: Path) -> RunResult:
    """TV(L_{n,1}, p_{π_n ω_n}) sur l'échelle de n, médiane sur les répliques."""
    result = RunResult()
    cap = config.distortion.cap
    rows, summary = [], []
    for n in config.sampling.n_ladder:
        params = config.model.with_updates(n=n)
        tvs = []
        for r in range(config.sampling.replicates):
            graph = _draw_graph(config, params, r)
            kernel = PoissonFiberKernel(graph_type_pair(graph), cap)
            deviation = slln_deviation(empirical_measure(local_views(graph, cap)), kernel)
            tvs.append(deviation.total_variation)
            rows.append([n, r, deviation.total_variation, deviation.sup_norm])
        summary.append([n, float(np.median(tvs))])
        logger.info("slln_level_done", n=n, median_tv=summary[-1][1])

    write_csv_rows(_path(out_dir, result.add("slln.csv")), ["n", "replicate", "tv", "sup_norm"], rows)
    write_csv_rows(_path(out_dir, result.add("slln_summary.csv")), ["n", "median_tv"], summary)
    medians = [m for _, m in summary]
    result.metrics.update(
        monotone=all(b <= a for a, b in zip(medians, medians[1:])),
        last_median_tv=medians[-1],
    )
    return result


def run_cumulant(config: RunConfig, out_dir: Path) -> RunResult:
    """H_n(nt)/n Monte Carlo et Λ(t) sur la grille de t."""
    result = RunResult()
    params = config.model
    sigma = build_distortion(config)
    kernel = PoissonFiberKernel(limit_type_pair(params), sigma.cap)
    problem = SingleLetterProblem(sigma, kernel)
    samples = sample_distortions(
        sigma, params, config.sampling.outer, config.sampling.inner, **_sampling_options(config)
    )

    ts = config.sampling.t_grid
    empirical = cumulant_grid(ts, samples=samples)
    limit = cumulant_grid(ts, problem=problem)
    header = ["t", "value", "stderr"]
    write_csv_rows(_path(out_dir, result.add("cumulant_empirical.csv")), header, empirical.rows())
    write_csv_rows(_path(out_dir, result.add("cumulant_limit.csv")), header, limit.rows())

    gaps = [abs(e - s) for e, s in zip(empirical.values, limit.values)]
    result.metrics.update(max_gap=max(gaps) if gaps else 0.0, convex=empirical.convex)
    return result


def run_rd_curve(config: RunConfig, out_dir: Path) -> RunResult:
    """R(α) sur la grille, bornes α_min / α_av, diagnostic α_min^∞ optionnel."""
    result = RunResult()
    params = config.model
    sampling = config.sampling
    sigma = build_distortion(config)
    kernel = PoissonFiberKernel(limit_type_pair(params), sigma.cap)

    brackets = alpha_brackets(
        sigma, kernel, params, (sampling.outer, sampling.inner), **_sampling_options(config)
    )
    diagnostic = None
    if sampling.alpha_min_diagnostic:
        diagnostic = alpha_min_inf_diagnostic(
            sigma,
            params,
            brackets.alpha_min,
            sampling.n_ladder,
            (sampling.outer, sampling.inner),
            **_sampling_options(config),
        )

    alphas = sampling.alpha_grid or default_alpha_grid(sigma, kernel, sampling.alpha_points)
    curve = rd_curve(sigma, kernel, alphas, brackets=brackets, diagnostic=diagnostic, t_max=sampling.t_max)
    write_csv_rows(_path(out_dir, result.add("rd_curve.csv")), ["alpha", "R", "stderr"], curve.rows())
    write_csv_rows(
        _path(out_dir, result.add("rd_brackets.csv")),
        ["alpha_min", "alpha_min_stderr", "alpha_min_bias", "alpha_min_limit", "alpha_av", "alpha_min_inf_flag"],
        [[
            brackets.alpha_min,
            brackets.alpha_min_stderr,
            brackets.bias,
            brackets.alpha_min_limit,
            brackets.alpha_av,
            "" if curve.alpha_min_inf_flag is None else curve.alpha_min_inf_flag,
        ]],
    )
    result.metrics.update(alpha_min=brackets.alpha_min, alpha_av=brackets.alpha_av, points=len(alphas))
    return result


def run_ball_exponent(config: RunConfig, out_dir: Path) -> RunResult:
    """Exposant Monte Carlo de B(x, α) comparé au R(α) dual."""
    result = RunResult()
    params = config.model
    sampling = config.sampling
    sigma = build_distortion(config)
    kernel = PoissonFiberKernel(limit_type_pair(params), sigma.cap)
    problem = SingleLetterProblem(sigma, kernel)

    alpha = sampling.ball_alpha
    if alpha is None:
        alpha = alpha_brackets(
            sigma, kernel, params, (sampling.outer, sampling.inner), **_sampling_options(config)
        ).midpoint
    exponent = mc_ball_exponent(
        params,
        sigma,
        alpha,
        inner=sampling.ball_inner,
        shared_geometry=sampling.shared_geometry,
        threads=sampling.threads,
    )
    dual = legendre(problem.cumulant_fn(), alpha, side="nonpositive", t_max=sampling.t_max)
    write_csv_rows(
        _path(out_dir, result.add("ball_exponent.csv")),
        ["alpha", "n", "hits", "trials", "estimate", "ci_low", "ci_high", "dual_R"],
        [[alpha, exponent.n, exponent.hits, exponent.trials, exponent.estimate,
          exponent.ci_low, exponent.ci_high, dual]],
    )
    result.metrics.update(estimate=exponent.estimate, dual_R=dual, hits=exponent.hits)
    return result


def run_wsn_fit(config: RunConfig, out_dir: Path) -> RunResult:
    """Ajustement sur les CSV configurés, ou sur un jeu synthétique tiré du modèle."""
    result = RunResult()
    params = config.model
    if config.wsn.nodes_csv is not None:
        dataset = load_dataset(config.wsn.nodes_csv, config.wsn.links_csv, params.d)
    else:
        dataset = dataset_from_graph(sample_graph(params, 0), source=f"synthetic seed={params.seed}")
        nodes_path, links_path = write_dataset(dataset, resolve_output_path(out_dir, "dataset"))
        result.add(f"dataset/{nodes_path.name}")
        result.add(f"dataset/{links_path.name}")

    fit = fit_from_dataset(dataset, params.d, seed=params.seed, sample_size=GOF_SAMPLE_SIZE)
    _path(out_dir, result.add("wsn_fit.txt")).write_text(fit_report(fit), encoding="utf-8")

    grid = config.sampling.alpha_grid or np.linspace(
        0.0, 2.0 * fit.threshold if fit.threshold > 0 else 1.0, config.sampling.alpha_points
    ).tolist()
    write_csv_rows(
        _path(out_dir, result.add("wsn_step.csv")),
        ["alpha", "R"],
        [[alpha, rd_step(alpha, fit.threshold)] for alpha in grid],
    )
    result.metrics.update(threshold=fit.threshold, residual=fit.residual, nodes=dataset.n)
    return result


EXPERIMENT_RUNNERS: dict[str, Callable[[RunConfig, Path], RunResult]] = {
    "generate": run_generate,
    "stats": run_stats,
    "slln-check": run_slln_check,
    "cumulant": run_cumulant,
    "rd-curve": run_rd_curve,
    "ball-exponent": run_ball_exponent,
    "wsn-fit": run_wsn_fit,
}
