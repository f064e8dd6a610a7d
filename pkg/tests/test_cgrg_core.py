"""
Tests pour la génération de graphes géométriques aléatoires colorés.
"""

import math

import numpy as np
import pytest

from src.cgrg_core import (
    ColoredGeometricGraph,
    GeometricSkeleton,
    ball_volume_coefficient,
    build_edges,
    build_graph,
    check_edge_rule,
    radius_matrix,
    sample_colors,
    sample_coupled_pair,
    sample_graph,
    torus_distance,
    make_rng,
)
from src.config_loader import ModelParams
from src.empirical import graph_type_pair


def make_params(**overrides) -> ModelParams:
    data = {
        "d": 2,
        "n": 200,
        "alphabet": ["a", "b"],
        "pi": [0.5, 0.5],
        "lambda": [[1.0, 1.0], [1.0, 1.0]],
        "seed": 11,
    }
    data.update(overrides)
    return ModelParams(**data)


@pytest.fixture
def params():
    """Modèle à deux couleurs, λ ≡ 1, n = 200."""
    return make_params()


@pytest.mark.parametrize(
    "d,expected", [(1, 2.0), (2, math.pi), (3, 4 * math.pi / 3), (4, math.pi**2 / 2)]
)
def test_ball_volume_coefficient(d, expected):
    """Test volume de la boule unité."""
    assert ball_volume_coefficient(d) == pytest.approx(expected, rel=1e-14)


def test_torus_distance_wraparound():
    """Test distance avec repliement."""
    assert torus_distance([0.1], [0.9]) == pytest.approx(0.2)
    assert torus_distance([0.0, 0.0], [0.5, 0.5]) == pytest.approx(math.sqrt(0.5))
    assert torus_distance([0.3, 0.7], [0.3, 0.7]) == 0.0


def test_torus_distance_symmetric():
    """Test symétrie de la distance torique."""
    rng = np.random.default_rng(0)
    for _ in range(20):
        p, q = rng.random(3), rng.random(3)
        assert torus_distance(p, q) == torus_distance(q, p)


def test_torus_distance_dimension_mismatch():
    """Test erreur sur dimensions différentes."""
    with pytest.raises(ValueError):
        torus_distance([0.1, 0.2], [0.1])


def test_radius_matrix(params):
    """Test r(a,b) = (λ/n)^{1/d}."""
    radii = radius_matrix(params)
    assert radii == pytest.approx(np.full((2, 2), math.sqrt(1.0 / 200)))


def test_single_vertex_has_no_edges():
    """Test n = 1 : aucun voisin."""
    graph = sample_graph(make_params(n=1, **{"lambda": [[0.1, 0.1], [0.1, 0.1]]}))
    assert graph.n == 1
    assert graph.num_edges == 0


def test_two_points_hand_evaluated():
    """Test d = 1, n = 2, λ ≡ 0.5 : r = 0.25 ≥ 0.1, arête présente."""
    params = make_params(d=1, n=2, **{"lambda": [[0.5, 0.5], [0.5, 0.5]]})
    graph = build_graph([[0.10], [0.20]], [0, 1], params)
    assert graph.edges.tolist() == [[0, 1]]
    assert graph.has_edge(1, 0)


def test_radius_too_large_rejected():
    """Test rejet de r(a,b) ≥ 1/2."""
    params = make_params(d=1, n=2, **{"lambda": [[1.0, 1.0], [1.0, 1.0]]})
    with pytest.raises(ValueError, match="injectivity"):
        sample_graph(params)


def test_graph_invariants(params):
    """Test coordonnées dans [0,1), arêtes u < v, pas de boucle."""
    graph = sample_graph(params)
    assert np.all(graph.points >= 0) and np.all(graph.points < 1)
    assert np.all(graph.edges[:, 0] < graph.edges[:, 1])
    assert not graph.has_edge(3, 3)


def test_determinism(params):
    """Test mêmes paramètres → graphes identiques bit à bit."""
    g1 = sample_graph(params, 3)
    g2 = sample_graph(params, 3)
    assert np.array_equal(g1.points, g2.points)
    assert np.array_equal(g1.colors, g2.colors)
    assert np.array_equal(g1.edges, g2.edges)
    g3 = sample_graph(params, 4)
    assert not np.array_equal(g1.points, g3.points)


def test_edge_rule_exhaustive(params):
    """Test règle d'arête revérifiée en O(n²)."""
    for replicate in range(5):
        assert check_edge_rule(sample_graph(params, replicate), params)


def test_edge_rule_rejects_wrong_edges():
    """Test arête manquante ou en trop : rejet par le rebalayage des paires."""
    params = make_params(n=3, **{"lambda": [[0.03, 0.03], [0.03, 0.03]]})  # r = 0.1
    points = [[0.1, 0.1], [0.12, 0.1], [0.6, 0.6]]
    colors = [0, 1, 0]
    good = ColoredGeometricGraph(points, colors, [[0, 1]], ("a", "b"))
    missing = ColoredGeometricGraph(points, colors, np.zeros((0, 2)), ("a", "b"))
    extra = ColoredGeometricGraph(points, colors, [[0, 1], [1, 2]], ("a", "b"))
    assert check_edge_rule(good, params)
    assert not check_edge_rule(missing, params)
    assert not check_edge_rule(extra, params)


def test_edge_rule_wraparound_pair():
    """Test paire reliée à travers le bord du tore."""
    params = make_params(n=2, **{"lambda": [[0.02, 0.02], [0.02, 0.02]]})  # r = 0.1
    points = [[0.01, 0.5], [0.97, 0.5]]
    linked = ColoredGeometricGraph(points, [0, 0], [[0, 1]], ("a", "b"))
    unlinked = ColoredGeometricGraph(points, [0, 0], np.zeros((0, 2)), ("a", "b"))
    assert check_edge_rule(linked, params)
    assert not check_edge_rule(unlinked, params)


def test_edge_rule_color_dependent():
    """Test règle d'arête avec λ dépendant des couleurs (dont une ligne nulle)."""
    params = make_params(n=150, **{"lambda": [[3.0, 0.5], [0.5, 0.0]]})
    graph = sample_graph(params)
    assert check_edge_rule(graph, params)
    # couleur b : aucune arête b-b
    colors = graph.colors[graph.edges]
    assert not np.any((colors[:, 0] == 1) & (colors[:, 1] == 1))


@pytest.mark.parametrize("method", ["grid", "kdtree"])
def test_neighbor_methods_agree_with_brute(method):
    """Test recherche accélérée identique au balayage O(n²) sur 50 instances."""
    for seed in range(50):
        rng = make_rng(seed, 9)
        n = int(rng.integers(2, 501))
        d = int(rng.integers(1, 4))
        params = make_params(n=n, d=d, seed=seed, **{"lambda": [[2.0, 0.7], [0.7, 1.2]]})
        if radius_matrix(params).max() >= 0.5:
            continue
        points = rng.random((n, d))
        colors = sample_colors(params, rng)
        radii = radius_matrix(params)
        fast = build_edges(points, colors, radii, method)
        brute = build_edges(points, colors, radii, "brute")
        assert np.array_equal(fast, brute)


def test_exact_composition():
    """Test composition exacte n·π (plus forts restes)."""
    params = make_params(n=7, pi=[0.3, 0.7], exact_composition=True)
    colors = sample_colors(params, make_rng(0))
    assert np.bincount(colors, minlength=2).tolist() == [2, 5]


def test_color_frequencies_concentrate():
    """Test |π_n(a) − π(a)| ≤ 3σ dans au moins 95 % de 100 graines."""
    within = 0
    for seed in range(100):
        params = make_params(n=1000, seed=seed, pi=[0.3, 0.7])
        colors = sample_colors(params, make_rng(seed))
        freq = np.bincount(colors, minlength=2) / params.n
        bound = 3 * np.sqrt(params.pi_array() * (1 - params.pi_array()) / params.n)
        within += bool(np.all(np.abs(freq - params.pi_array()) <= bound))
    assert within >= 95


def test_coupled_pair_shares_points(params):
    """Test X et Y sur les mêmes positions, colorations indépendantes."""
    gx, gy = sample_coupled_pair(params)
    assert np.array_equal(gx.points, gy.points)
    assert not np.array_equal(gx.colors, gy.colors)
    assert check_edge_rule(gy, params)


def test_coupled_pair_shared_geometry(params):
    """Test géométrie partagée : Y reprend les arêtes de X."""
    gx, gy = sample_coupled_pair(params, shared_geometry=True)
    assert np.array_equal(gx.edges, gy.edges)


def test_skeleton_recolor_matches_build(params):
    """Test recoloriage d'un squelette = construction directe."""
    graph = sample_graph(params)
    radii = radius_matrix(params)
    skeleton = GeometricSkeleton.build(graph.points, float(radii.max()))
    assert np.array_equal(skeleton.edges_for(graph.colors, radii), graph.edges)


def test_graph_rejects_bad_coordinates():
    """Test rejet de coordonnées hors [0,1)."""
    with pytest.raises(ValueError, match="Coordinates"):
        ColoredGeometricGraph(np.array([[1.0]]), np.array([0]), np.zeros((0, 2)), ("a",))


def test_neighbor_counts(params):
    """Test comptages de voisins par couleur cohérents avec les degrés."""
    graph = sample_graph(params)
    assert graph.color_counts.sum() == 2 * graph.num_edges
    u = int(graph.edges[0, 0]) if graph.num_edges else 0
    neighbors = graph.neighbors(u)
    assert graph.degrees()[u] == len(neighbors)


@pytest.mark.slow
def test_edge_intensity_limit():
    """Test ω_n(a,b) → v_2·λ·π(a)π(b) = π/4 (médiane sur 20 graines, 10 %)."""
    params = make_params(n=5000)
    target = math.pi / 4
    omegas = np.array([graph_type_pair(sample_graph(params, r)).omega for r in range(20)])
    rel = np.abs(np.median(omegas, axis=0) - target) / target
    assert np.all(rel <= 0.10)
