"""
Génération de graphes géométriques aléatoires colorés (CGRG) sur le tore [0,1)^d.

Les sommets sont des points uniformes du tore, colorés selon π ; deux sommets de
couleurs (a, b) sont reliés si leur distance torique est au plus
r(a,b) = (λ(a,b)/n)^{1/d}, ce qui donne l'intensité limite v_d·λ(a,b)·π(a)·π(b).
"""

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Literal

import numpy as np
from scipy.spatial import cKDTree

from src.config_loader import ModelParams
from src.logger import get_logger

logger = get_logger(__name__)

# Flux aléatoires indépendants : processus X (et positions), processus Y
STREAM_X = 0
STREAM_Y = 1

NeighborMethod = Literal["kdtree", "grid", "brute"]
NEIGHBOR_METHODS = ("kdtree", "grid", "brute")

# Marge relative sur le rayon de recherche du kd-tree ; le filtre exact suit
_SEARCH_SLACK = 1e-9


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """
    Générateur déterministe dérivé de (graine, clés).

    Les clés (flux, réplique externe, réplique interne) rendent chaque tirage
    indépendant de l'ordonnancement des threads.
    """
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(sequence))


def ball_volume_coefficient(d: int) -> float:
    """Volume de la boule unité en dimension d : π^{d/2} / Γ(d/2 + 1)."""
    if d < 1:
        raise ValueError(f"Dimension must be >= 1, got {d}")
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def radius_matrix(params: ModelParams) -> np.ndarray:
    """Rayons de connexion r(a,b) = (λ(a,b)/n)^{1/d}."""
    return np.power(params.lambda_array() / params.n, 1.0 / params.d)


def check_radii(radii: np.ndarray) -> None:
    if np.any(radii >= 0.5):
        a, b = np.unravel_index(int(np.argmax(radii)), radii.shape)
        raise ValueError(
            f"Connection radius r({a},{b})={radii[a, b]:.6g} >= 1/2 exceeds the torus "
            "injectivity scale; increase n or decrease lambda"
        )


def _wrapped_norm(diff: np.ndarray) -> np.ndarray:
    """Norme euclidienne avec repliement par coordonnée min(|Δ|, 1-|Δ|)."""
    diff = np.abs(diff)
    diff = np.minimum(diff, 1.0 - diff)
    return np.sqrt(np.sum(diff * diff, axis=-1))


def torus_distance(p, q) -> float:
    """
    Distance euclidienne sur le tore [0,1)^d.

    Raises:
        ValueError: dimensions différentes ou coordonnées hors de [0,1)
    """
    p = np.atleast_1d(np.asarray(p, dtype=float))
    q = np.atleast_1d(np.asarray(q, dtype=float))
    if p.ndim != 1 or p.shape != q.shape:
        raise ValueError(f"Dimension mismatch: {p.shape} vs {q.shape}")
    for coords in (p, q):
        if np.any(coords < 0.0) or np.any(coords >= 1.0):
            raise ValueError("Coordinates must lie in [0, 1)")
    return float(_wrapped_norm(p - q))


def neighbor_color_counts(n: int, k: int, edges: np.ndarray, colors: np.ndarray) -> np.ndarray:
    """Matrice (n, k) : nombre de voisins de chaque couleur pour chaque sommet."""
    if len(edges) == 0:
        return np.zeros((n, k), dtype=np.int64)
    u, v = edges[:, 0], edges[:, 1]
    flat = np.concatenate([u * k + colors[v], v * k + colors[u]])
    return np.bincount(flat, minlength=n * k).reshape(n, k)


# ------------------------------------------------------------------------
# Recherche de paires candidates
# ------------------------------------------------------------------------

def _pair_distances(points: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    if len(pairs) == 0:
        return np.zeros(0)
    return _wrapped_norm(points[pairs[:, 0]] - points[pairs[:, 1]])


def _brute_pairs(points: np.ndarray) -> np.ndarray:
    n = len(points)
    iu, ju = np.triu_indices(n, k=1)
    return np.column_stack([iu, ju]).astype(np.int64)


def _kdtree_pairs(points: np.ndarray, cutoff: float) -> np.ndarray:
    tree = cKDTree(points, boxsize=1.0)
    pairs = tree.query_pairs(r=cutoff * (1.0 + _SEARCH_SLACK), output_type="ndarray")
    return np.asarray(pairs, dtype=np.int64).reshape(-1, 2)


def _grid_pairs(points: np.ndarray, cutoff: float) -> np.ndarray:
    """Paires issues de cellules voisines (côté de cellule ≥ cutoff, repliement torique)."""
    n, d = points.shape
    m = int(math.floor(1.0 / cutoff))
    if m < 3:
        # Moins de 3 cellules par axe : les voisinages se recouvrent, on scanne tout
        return _brute_pairs(points)

    cells = np.minimum((points * m).astype(np.int64), m - 1)
    strides = m ** np.arange(d, dtype=np.int64)
    lin = cells @ strides
    order = np.argsort(lin, kind="stable")
    sorted_lin = lin[order]
    all_cells = np.arange(m**d, dtype=np.int64)
    starts = np.searchsorted(sorted_lin, all_cells, side="left")
    counts = np.searchsorted(sorted_lin, all_cells, side="right") - starts

    chunks = []
    for offset in itertools.product((-1, 0, 1), repeat=d):
        nb_lin = ((cells + np.asarray(offset, dtype=np.int64)) % m) @ strides
        cnt = counts[nb_lin]
        total = int(cnt.sum())
        if total == 0:
            continue
        i_rep = np.repeat(np.arange(n, dtype=np.int64), cnt)
        first = np.repeat(starts[nb_lin], cnt)
        within = np.arange(total, dtype=np.int64) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        j_rep = order[first + within]
        keep = i_rep < j_rep
        chunks.append(np.column_stack([i_rep[keep], j_rep[keep]]))

    if not chunks:
        return np.zeros((0, 2), dtype=np.int64)
    return np.concatenate(chunks)


def _canonical_edges(pairs: np.ndarray) -> np.ndarray:
    """Arêtes (u < v), triées lexicographiquement, sans doublon."""
    if len(pairs) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    pairs = np.sort(pairs, axis=1)
    pairs = np.unique(pairs, axis=0)
    return pairs.astype(np.int64)


@dataclass(frozen=True, eq=False)
class GeometricSkeleton:
    """
    Paires de points à distance ≤ cutoff sur un nuage fixé.

    Sert à colorer de nombreux graphes Y sur les mêmes positions z sans
    refaire la recherche de voisins.
    """

    points: np.ndarray
    cutoff: float
    pairs: np.ndarray
    distances: np.ndarray

    @classmethod
    def build(
        cls, points: np.ndarray, cutoff: float, method: NeighborMethod = "kdtree"
    ) -> "GeometricSkeleton":
        if method not in NEIGHBOR_METHODS:
            raise ValueError(f"Unknown neighbor method: {method}")
        points = np.asarray(points, dtype=float)
        if cutoff <= 0.0 or len(points) < 2:
            empty = np.zeros((0, 2), dtype=np.int64)
            return cls(points, float(cutoff), empty, np.zeros(0))

        if method == "kdtree":
            candidates = _kdtree_pairs(points, cutoff)
        elif method == "grid":
            candidates = _grid_pairs(points, cutoff)
        else:
            candidates = _brute_pairs(points)

        candidates = _canonical_edges(candidates)
        distances = _pair_distances(points, candidates)
        keep = distances <= cutoff
        return cls(points, float(cutoff), candidates[keep], distances[keep])

    def edges_for(self, colors: np.ndarray, radii: np.ndarray) -> np.ndarray:
        """Arêtes de la règle r(couleur_u, couleur_v) ≥ distance (r > 0)."""
        if len(self.pairs) == 0:
            return np.zeros((0, 2), dtype=np.int64)
        r = radii[colors[self.pairs[:, 0]], colors[self.pairs[:, 1]]]
        keep = (r > 0.0) & (self.distances <= r)
        return self.pairs[keep]


@dataclass(frozen=True, eq=False)
class ColoredGeometricGraph:
    """Réalisation de X^[z] : positions, couleurs, arêtes (u < v)."""

    points: np.ndarray
    colors: np.ndarray
    edges: np.ndarray
    alphabet: tuple[str, ...]

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        colors = np.asarray(self.colors, dtype=np.int64)
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if points.ndim != 2 or len(points) != len(colors):
            raise ValueError("points must be an (n, d) array matching colors")
        if np.any(points < 0.0) or np.any(points >= 1.0):
            raise ValueError("Coordinates must lie in [0, 1)")
        if len(colors) and (colors.min() < 0 or colors.max() >= len(self.alphabet)):
            raise ValueError("Color index out of alphabet range")
        if len(edges):
            if np.any(edges[:, 0] >= edges[:, 1]):
                raise ValueError("Edges must be stored as (u, v) with u < v (no self-loops)")
            if edges.max() >= len(points):
                raise ValueError("Edge endpoint out of range")
        for arr in (points, colors, edges):
            arr.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "colors", colors)
        object.__setattr__(self, "edges", edges)

    @property
    def n(self) -> int:
        return len(self.colors)

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def k(self) -> int:
        return len(self.alphabet)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def color_counts(self) -> np.ndarray:
        """Comptages (n, k) des couleurs voisines."""
        counts = neighbor_color_counts(self.n, self.k, self.edges, self.colors)
        counts.setflags(write=False)
        return counts

    @cached_property
    def _edge_set(self) -> frozenset:
        return frozenset(map(tuple, self.edges.tolist()))

    def has_edge(self, u: int, v: int) -> bool:
        if u == v:
            return False
        return (min(u, v), max(u, v)) in self._edge_set

    def neighbors(self, u: int) -> np.ndarray:
        mask_u = self.edges[:, 0] == u
        mask_v = self.edges[:, 1] == u
        return np.sort(np.concatenate([self.edges[mask_u, 1], self.edges[mask_v, 0]]))

    def degrees(self) -> np.ndarray:
        return self.color_counts.sum(axis=1)


# ------------------------------------------------------------------------
# Échantillonnage
# ------------------------------------------------------------------------

def sample_colors(params: ModelParams, rng: np.random.Generator) -> np.ndarray:
    """
    Couleurs i.i.d. selon π, ou composition exacte n·π (plus forts restes)
    permutée aléatoirement quand `exact_composition` est actif.
    """
    n, k = params.n, params.k
    pi = params.pi_array()
    if not params.exact_composition:
        return rng.choice(k, size=n, p=pi).astype(np.int64)

    raw = n * pi
    counts = np.floor(raw).astype(np.int64)
    remainder = n - int(counts.sum())
    if remainder > 0:
        # Ordre stable : à reste égal, la couleur de plus petit indice gagne
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:remainder]] += 1
    colors = np.repeat(np.arange(k, dtype=np.int64), counts)
    return rng.permutation(colors)


def build_edges(
    points: np.ndarray,
    colors: np.ndarray,
    radii: np.ndarray,
    method: NeighborMethod = "kdtree",
) -> np.ndarray:
    """Ensemble d'arêtes de la règle couleur-dépendante."""
    cutoff = float(radii.max()) if radii.size else 0.0
    skeleton = GeometricSkeleton.build(points, cutoff, method)
    return skeleton.edges_for(np.asarray(colors, dtype=np.int64), radii)


def build_graph(
    points,
    colors,
    params: ModelParams,
    method: NeighborMethod = "kdtree",
) -> ColoredGeometricGraph:
    """Graphe à positions et couleurs imposées (les rayons viennent de params)."""
    points = np.asarray(points, dtype=float).reshape(len(colors), params.d)
    colors = np.asarray(colors, dtype=np.int64)
    radii = radius_matrix(params)
    check_radii(radii)
    edges = build_edges(points, colors, radii, method)
    return ColoredGeometricGraph(points, colors, edges, params.alphabet)


def sample_graph(
    params: ModelParams,
    replicate: int = 0,
    *,
    method: NeighborMethod = "kdtree",
    stream: int = STREAM_X,
    attempt: int = 0,
) -> ColoredGeometricGraph:
    """
    Tire un CGRG : points uniformes sur le tore, couleurs selon π, arêtes
    selon r(a,b). Déterministe pour (params.seed, stream, replicate, attempt).

    Raises:
        ValueError: si un rayon r(a,b) atteint 1/2
    """
    radii = radius_matrix(params)
    check_radii(radii)

    rng = make_rng(params.seed, stream, replicate, attempt)
    points = rng.random((params.n, params.d))
    colors = sample_colors(params, rng)
    edges = build_edges(points, colors, radii, method)

    graph = ColoredGeometricGraph(points, colors, edges, params.alphabet)
    logger.debug(
        "graph_sampled",
        n=params.n,
        d=params.d,
        edges=graph.num_edges,
        replicate=replicate,
        stream=stream,
    )
    return graph


def sample_coupled_pair(
    params_x: ModelParams,
    params_y: ModelParams | None = None,
    replicate: int = 0,
    *,
    shared_geometry: bool = False,
    method: NeighborMethod = "kdtree",
) -> tuple[ColoredGeometricGraph, ColoredGeometricGraph]:
    """
    Deux processus X^[z], Y^[z] sur les mêmes positions z, colorations indépendantes.

    Avec `shared_geometry`, Y reprend l'ensemble d'arêtes de X ; sinon chaque
    processus construit ses arêtes à partir de ses propres couleurs.
    """
    params_y = params_y or params_x
    if (params_x.n, params_x.d, params_x.alphabet) != (params_y.n, params_y.d, params_y.alphabet):
        raise ValueError("Coupled processes must share n, d and the alphabet")

    gx = sample_graph(params_x, replicate, method=method, stream=STREAM_X)
    rng_y = make_rng(params_y.seed, STREAM_Y, replicate, 0)
    colors_y = sample_colors(params_y, rng_y)
    if shared_geometry:
        edges_y = gx.edges
    else:
        radii_y = radius_matrix(params_y)
        check_radii(radii_y)
        edges_y = build_edges(gx.points, colors_y, radii_y, method)
    gy = ColoredGeometricGraph(gx.points, colors_y, edges_y, params_y.alphabet)
    return gx, gy


def check_edge_rule(graph: ColoredGeometricGraph, params: ModelParams) -> bool:
    """
    Vérification exhaustive O(n²) de la règle d'arête, paire par paire avec
    torus_distance, sans passer par la recherche de voisins.
    """
    radii = radius_matrix(params)
    points = graph.points.tolist()
    colors = graph.colors.tolist()
    present = {(int(u), int(v)) for u, v in graph.edges.tolist()}
    if len(present) != graph.num_edges:
        return False
    for u, v in itertools.combinations(range(graph.n), 2):
        r = radii[colors[u], colors[v]]
        linked = r > 0.0 and torus_distance(points[u], points[v]) <= r
        if linked != ((u, v) in present):
            logger.debug("edge_rule_violated", u=u, v=v, linked=bool(linked))
            return False
    return True
