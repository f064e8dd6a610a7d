"""
Application réseau de capteurs sans fil (SG : capteurs avec traitement,
SI : capteurs simples) : intensité limite des paires, seuil débit-distorsion
en marche d'escalier et ajustement du modèle sur une topologie mesurée.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.cgrg_core import ColoredGeometricGraph, ball_volume_coefficient
from src.config_loader import ModelParams
from src.empirical import GoodnessOfFit, poisson_goodness_of_fit
from src.logger import get_logger
from src.report_builder import ReportBuilder
from src.utils import format_float, parse_float, read_csv_rows, write_csv_rows

logger = get_logger(__name__)

WSN_ALPHABET = ("SG", "SI")
NodeType = Literal["SG", "SI"]


class DatasetFormatError(ValueError):
    """CSV de topologie mal formé (en-tête, ligne, type de nœud, coordonnée)."""


class WsnNode(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    id: str = Field(..., min_length=1)
    type: NodeType
    coords: tuple[float, ...] = Field(..., min_length=1)


class WsnDataset(BaseModel):
    """Topologie de réseau de capteurs : nœuds typés, liens, métadonnées."""

    model_config = ConfigDict(extra="forbid")

    nodes: list[WsnNode]
    links: list[tuple[str, str]] = Field(default_factory=list)
    metadata: dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def validate_topology(self) -> "WsnDataset":
        ids = [node.id for node in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValueError("Node ids must be unique")
        dims = {len(node.coords) for node in self.nodes}
        if len(dims) > 1:
            raise ValueError("All nodes must have the same dimension")
        for node in self.nodes:
            if any(not (0.0 <= x < 1.0) for x in node.coords):
                raise ValueError(f"Node {node.id} has coordinates outside [0, 1)")
        known = set(ids)
        for u, v in self.links:
            if u == v:
                raise ValueError(f"Self-link on node {u}")
            if u not in known or v not in known:
                raise ValueError(f"Link ({u}, {v}) references an unknown node")
        return self

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def d(self) -> int:
        return len(self.nodes[0].coords) if self.nodes else 0


# ------------------------------------------------------------------------
# Formules limites
# ------------------------------------------------------------------------

def omega_limit(lam, pi, d: int) -> np.ndarray:
    """ω(a,b) = v_d · λ(a,b) · π(a) · π(b)."""
    lam = np.asarray(lam, dtype=float)
    pi = np.asarray(pi, dtype=float)
    return ball_volume_coefficient(d) * lam * np.outer(pi, pi)


def _wsn_indices(alphabet: Sequence[str]) -> tuple[int, int]:
    if len(alphabet) != 2 or set(alphabet) != set(WSN_ALPHABET):
        raise ValueError(f"Alphabet must be exactly {{SG, SI}}, got {tuple(alphabet)}")
    return list(alphabet).index("SG"), list(alphabet).index("SI")


def rd_threshold(omega, alphabet: Sequence[str] = WSN_ALPHABET) -> float:
    """2ω(SG,SI) + ω(SG,SG) + ω(SI,SI) + 2ω(SI,SG)."""
    sg, si = _wsn_indices(alphabet)
    omega = np.asarray(omega, dtype=float)
    return math.fsum(
        [2 * omega[sg, si], omega[sg, sg], omega[si, si], 2 * omega[si, sg]]
    )


def rd_step(alpha: float, threshold: float) -> float:
    """0 si α ≥ seuil (borne incluse), +∞ sinon."""
    return 0.0 if alpha >= threshold else math.inf


# ------------------------------------------------------------------------
# Ajustement
# ------------------------------------------------------------------------

@dataclass(frozen=True)
class PairFit:
    a: str
    b: str
    mean: float
    test: GoodnessOfFit


@dataclass(frozen=True)
class WsnFit:
    """Paramètres estimés et diagnostics d'ajustement."""

    params: ModelParams
    pi_hat: np.ndarray
    omega_hat: np.ndarray
    lambda_hat: np.ndarray
    missing: tuple[tuple[str, str], ...]
    threshold: float
    residual: float
    goodness: tuple[PairFit, ...] = field(default=())

    @property
    def alphabet(self) -> tuple[str, ...]:
        return self.params.alphabet


def _type_indices(ds: WsnDataset) -> tuple[np.ndarray, dict[str, int]]:
    index = {node.id: i for i, node in enumerate(ds.nodes)}
    colors = np.array([WSN_ALPHABET.index(node.type) for node in ds.nodes], dtype=np.int64)
    return colors, index


def _link_array(ds: WsnDataset, index: dict[str, int]) -> np.ndarray:
    """Liens en indices (u < v), doublons retirés."""
    if not ds.links:
        return np.zeros((0, 2), dtype=np.int64)
    pairs = np.sort(np.array([(index[u], index[v]) for u, v in ds.links], dtype=np.int64), axis=1)
    return np.unique(pairs, axis=0)


def fit_from_dataset(
    ds: WsnDataset,
    d: int | None = None,
    *,
    seed: int = 0,
    sample_size: int | None = 500,
) -> WsnFit:
    """
    π̂ par fréquences, ω̂_n par comptage des paires ordonnées / n,
    λ̂(a,b) = ω̂_n(a,b) / (v_d π̂(a) π̂(b)) ; les couples sans nœud sont signalés manquants.

    Raises:
        ValueError: jeu de données vide
    """
    if ds.n == 0:
        raise ValueError("Cannot fit an empty dataset")
    d = d or ds.d
    n, k = ds.n, len(WSN_ALPHABET)
    colors, index = _type_indices(ds)
    edges = _link_array(ds, index)

    pi_hat = np.bincount(colors, minlength=k) / n
    omega_counts = np.zeros((k, k))
    counts = np.zeros((n, k), dtype=np.int64)
    if len(edges):
        cu, cv = colors[edges[:, 0]], colors[edges[:, 1]]
        np.add.at(omega_counts, (cu, cv), 1)
        np.add.at(omega_counts, (cv, cu), 1)
        np.add.at(counts, (edges[:, 0], cv), 1)
        np.add.at(counts, (edges[:, 1], cu), 1)
    omega_hat = omega_counts / n

    v_d = ball_volume_coefficient(d)
    lambda_hat = np.full((k, k), np.nan)
    missing = []
    for a in range(k):
        for b in range(k):
            denominator = v_d * (pi_hat[a] * pi_hat[b])
            if denominator > 0:
                lambda_hat[a, b] = omega_hat[a, b] / denominator
            else:
                missing.append((WSN_ALPHABET[a], WSN_ALPHABET[b]))

    lam = np.where(np.isnan(lambda_hat), 0.0, lambda_hat)
    params = ModelParams(
        d=d,
        n=n,
        alphabet=WSN_ALPHABET,
        pi=tuple(pi_hat.tolist()),
        **{"lambda": tuple(tuple(row) for row in lam.tolist())},
        seed=seed,
    )

    known = ~np.isnan(lambda_hat)
    implied = omega_limit(lam, pi_hat, d)
    residual = float(np.max(np.abs(implied - omega_hat)[known], initial=0.0))

    rng = np.random.default_rng(seed)
    goodness = []
    for a in range(k):
        if pi_hat[a] == 0:
            continue
        for b in range(k):
            mean = omega_hat[a, b] / pi_hat[a]
            test = poisson_goodness_of_fit(
                counts[colors == a, b], mean, sample_size=sample_size, rng=rng
            )
            goodness.append(PairFit(WSN_ALPHABET[a], WSN_ALPHABET[b], mean, test))

    fit = WsnFit(
        params=params,
        pi_hat=pi_hat,
        omega_hat=omega_hat,
        lambda_hat=lambda_hat,
        missing=tuple(missing),
        threshold=rd_threshold(omega_hat),
        residual=residual,
        goodness=tuple(goodness),
    )
    if missing:
        logger.warning("wsn_fit_missing_entries", missing=[f"{a}-{b}" for a, b in missing])
    logger.info(
        "wsn_fit_done",
        nodes=n,
        links=len(edges),
        threshold=fit.threshold,
        residual=residual,
    )
    return fit


def fit_report(fit: WsnFit) -> str:
    """Rapport texte de l'ajustement (π̂, λ̂, ω̂, seuil, table d'adéquation)."""
    return ReportBuilder().build_fit_report(fit)


# ------------------------------------------------------------------------
# Entrées / sorties
# ------------------------------------------------------------------------

def _normalize(coords: np.ndarray) -> tuple[np.ndarray, dict[str, Any]]:
    """Ramène chaque axe sur [0, 1) par sa boîte englobante (déjà sur le tore : inchangé)."""
    if np.all(coords >= 0.0) and np.all(coords < 1.0):
        return coords, {"normalized": False}
    lower = coords.min(axis=0)
    span = coords.max(axis=0) - lower
    safe = np.where(span > 0, span, 1.0)
    scaled = np.minimum((coords - lower) / safe, np.nextafter(1.0, 0.0))
    positive = span[span > 0]
    metadata = {
        "normalized": True,
        "bounding_box_min": lower.tolist(),
        "bounding_box_span": span.tolist(),
        "anisotropy": float(positive.max() / positive.min()) if len(positive) else 1.0,
    }
    return scaled, metadata


def load_dataset(nodes_csv: str | Path, links_csv: str | Path, d: int | None = None) -> WsnDataset:
    """
    Lit `id,type,x_1,…,x_d` et `id_u,id_v`.

    Raises:
        FileNotFoundError: fichier absent
        DatasetFormatError: en-tête ou contenu invalide
    """
    header, rows = read_csv_rows(nodes_csv)
    if header[:2] != ["id", "type"] or len(header) < 3:
        raise DatasetFormatError(f"Nodes CSV header must start with id,type,x_1: {header}")
    dim = len(header) - 2
    if d is not None and d != dim:
        raise DatasetFormatError(f"Nodes CSV has {dim} coordinates, expected d={d}")
    if not rows:
        raise DatasetFormatError("Nodes CSV has no rows")

    for i, row in enumerate(rows, start=1):
        if len(row) != dim + 2:
            raise DatasetFormatError(
                f"Nodes CSV row {i}: expected {dim + 2} fields, got {len(row)}: {row}"
            )
    try:
        coords = np.array([[parse_float(x) for x in row[2:]] for row in rows], dtype=float)
    except ValueError as e:
        raise DatasetFormatError(f"Nodes CSV has a non-numeric coordinate: {e}") from e
    scaled, metadata = _normalize(coords)

    link_header, link_rows = read_csv_rows(links_csv)
    if link_header != ["id_u", "id_v"]:
        raise DatasetFormatError(f"Links CSV header must be id_u,id_v: {link_header}")
    links = []
    for i, row in enumerate(link_rows, start=1):
        if len(row) != 2 or not row[0].strip() or not row[1].strip():
            raise DatasetFormatError(f"Links CSV row {i}: expected id_u,id_v, got {row}")
        links.append((row[0].strip(), row[1].strip()))

    metadata["source"] = f"{Path(nodes_csv).name} + {Path(links_csv).name}"
    try:
        dataset = WsnDataset(
            nodes=[
                WsnNode(id=row[0].strip(), type=row[1].strip(), coords=tuple(point))
                for row, point in zip(rows, scaled.tolist())
            ],
            links=links,
            metadata=metadata,
        )
    except ValidationError as e:
        first = e.errors()[0]
        raise DatasetFormatError(f"Invalid WSN dataset: {first['msg']}") from e
    logger.info("wsn_dataset_loaded", nodes=dataset.n, links=len(dataset.links), d=dim)
    return dataset


def write_dataset(ds: WsnDataset, directory: str | Path, prefix: str = "wsn") -> tuple[Path, Path]:
    """Écrit le jeu de données au schéma de load_dataset."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    nodes_path = directory / f"{prefix}_nodes.csv"
    links_path = directory / f"{prefix}_links.csv"
    header = ["id", "type"] + [f"x_{i + 1}" for i in range(ds.d)]
    write_csv_rows(
        nodes_path,
        header,
        ([node.id, node.type] + [format_float(x) for x in node.coords] for node in ds.nodes),
    )
    write_csv_rows(links_path, ["id_u", "id_v"], ds.links)
    return nodes_path, links_path


def dataset_from_graph(g: ColoredGeometricGraph, source: str = "synthetic") -> WsnDataset:
    """Jeu de données synthétique à partir d'un CGRG sur l'alphabet {SG, SI}."""
    _wsn_indices(g.alphabet)
    return WsnDataset(
        nodes=[
            WsnNode(id=str(i), type=g.alphabet[c], coords=tuple(p))
            for i, (c, p) in enumerate(zip(g.colors.tolist(), g.points.tolist()))
        ],
        links=[(str(u), str(v)) for u, v in g.edges.tolist()],
        metadata={"source": source, "normalized": False},
    )
