"""
Formats d'échange : graphe texte, mesures / noyau / grilles en CSV,
type (π, ω) et manifeste de run en JSON.
"""

import json
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from src.cgrg_core import ColoredGeometricGraph
from src.empirical import LocalView, Measure, TypePair
from src.limit_kernel import PoissonFiberKernel
from src.logger import get_logger
from src.utils import format_float, parse_float, read_csv_rows, write_csv_rows

logger = get_logger(__name__)

MANIFEST_VERSION = 1
PACKAGE_NAME = "cgrg-lossy-aep"


def toolkit_version() -> str:
    try:
        return version(PACKAGE_NAME)
    except PackageNotFoundError:
        return "unknown"


# ------------------------------------------------------------------------
# Graphe
# ------------------------------------------------------------------------

def write_graph(g: ColoredGeometricGraph, path: str | Path) -> Path:
    """
    En-tête `d n |X|`, une ligne `index couleur x_1 … x_d` par sommet,
    puis une ligne `u v` par arête ; coordonnées à 17 chiffres significatifs.
    """
    path = Path(path)
    lines = [f"{g.d} {g.n} {g.k}"]
    for i, (c, point) in enumerate(zip(g.colors.tolist(), g.points.tolist())):
        lines.append(" ".join([str(i), g.alphabet[c]] + [format_float(x) for x in point]))
    lines.extend(f"{u} {v}" for u, v in g.edges.tolist())
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.debug("graph_written", path=str(path), n=g.n, edges=g.num_edges)
    return path


def read_graph(path: str | Path, alphabet: Sequence[str]) -> ColoredGeometricGraph:
    """
    Relit un graphe écrit par write_graph.

    Raises:
        ValueError: en-tête incohérent, couleur inconnue, ligne malformée
    """
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValueError(f"Empty graph file: {path}")
    d, n, k = (int(x) for x in lines[0].split())
    if k != len(alphabet):
        raise ValueError(f"Graph file has |X|={k}, alphabet has {len(alphabet)} colors")
    index = {label: i for i, label in enumerate(alphabet)}

    points = np.empty((n, d))
    colors = np.empty(n, dtype=np.int64)
    for line in lines[1 : n + 1]:
        fields = line.split()
        if len(fields) != d + 2:
            raise ValueError(f"Malformed vertex line: {line!r}")
        i = int(fields[0])
        if fields[1] not in index:
            raise ValueError(f"Unknown color label: {fields[1]!r}")
        colors[i] = index[fields[1]]
        points[i] = [parse_float(x) for x in fields[2:]]
    edges = [tuple(int(x) for x in line.split()) for line in lines[n + 1 :] if line.strip()]
    return ColoredGeometricGraph(points, colors, np.array(edges, dtype=np.int64).reshape(-1, 2), tuple(alphabet))


# ------------------------------------------------------------------------
# Mesures et noyaux
# ------------------------------------------------------------------------

def render_view(view: LocalView, alphabet: Sequence[str]) -> str:
    """Forme canonique `couleur|c_1,…,c_k` (comptages dans l'ordre de l'alphabet)."""
    return f"{alphabet[view.color]}|{','.join(str(c) for c in view.counts)}"


def parse_view(text: str, alphabet: Sequence[str]) -> LocalView:
    label, _, counts = text.strip().partition("|")
    if label not in alphabet:
        raise ValueError(f"Unknown color label in view: {text!r}")
    values = tuple(int(c) for c in counts.split(",")) if counts else ()
    if len(values) != len(alphabet):
        raise ValueError(f"View {text!r} needs {len(alphabet)} counts")
    return LocalView(list(alphabet).index(label), values)


def render_atom(atom, alphabet: Sequence[str]) -> str:
    """Vue, paire de vues (`vx;vy`) ou paire de couleurs (`a;b`)."""
    if isinstance(atom, LocalView):
        return render_view(atom, alphabet)
    if isinstance(atom, tuple):
        return ";".join(render_atom(part, alphabet) for part in atom)
    return alphabet[int(atom)]


def write_measure(mu: Measure, path: str | Path, alphabet: Sequence[str]) -> int:
    return write_csv_rows(
        path,
        ["atom_repr", "weight"],
        ((render_atom(atom, alphabet), w) for atom, w in mu.items()),
    )


def write_kernel(kernel: PoissonFiberKernel, path: str | Path, alphabet: Sequence[str]) -> int:
    header = ["color"] + [f"n_{label}" for label in alphabet] + ["mass"]
    rows = (
        [alphabet[c], *counts, float(m)]
        for c, counts, m in zip(
            kernel.colors.tolist(), kernel.counts.tolist(), kernel.masses.tolist()
        )
    )
    return write_csv_rows(path, header, rows)


def type_pair_to_dict(tp: TypePair, alphabet: Sequence[str]) -> dict[str, Any]:
    return {
        "alphabet": list(alphabet),
        "pi": [format_float(x) for x in tp.pi.tolist()],
        "omega": [[format_float(x) for x in row] for row in tp.omega.tolist()],
        "consistent": tp.consistent,
    }


def write_type_pair(tp: TypePair, path: str | Path, alphabet: Sequence[str]) -> Path:
    path = Path(path)
    path.write_text(json.dumps(type_pair_to_dict(tp, alphabet), indent=2) + "\n", encoding="utf-8")
    return path


def load_distortion_table(path: str | Path, alphabet: Sequence[str]) -> dict[tuple[LocalView, LocalView], float]:
    """
    Lit une table `view_x,view_y,value`.

    Raises:
        ValueError: en-tête invalide, vue illisible, doublon
    """
    header, rows = read_csv_rows(path)
    if header != ["view_x", "view_y", "value"]:
        raise ValueError(f"Distortion table header must be view_x,view_y,value: {header}")
    table: dict[tuple[LocalView, LocalView], float] = {}
    for row in rows:
        key = (parse_view(row[0], alphabet), parse_view(row[1], alphabet))
        if key in table:
            raise ValueError(f"Duplicate distortion table entry: {row[0]}, {row[1]}")
        table[key] = parse_float(row[2])
    logger.debug("distortion_table_loaded", path=str(path), entries=len(table))
    return table


# ------------------------------------------------------------------------
# Manifeste
# ------------------------------------------------------------------------

def build_manifest(config: dict[str, Any], seeds: dict[str, Any], outputs: Sequence[str]) -> dict[str, Any]:
    """Manifeste rejouable : configuration résolue, version, graines, fichiers produits."""
    return {
        "manifest_version": MANIFEST_VERSION,
        "toolkit": PACKAGE_NAME,
        "toolkit_version": toolkit_version(),
        "config": config,
        "seeds": seeds,
        "outputs": sorted(outputs),
    }


def write_manifest(manifest: dict[str, Any], path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
