"""
Tests pour les formats d'échange (graphe, mesures, noyau, manifeste).
"""

import json

import numpy as np
import pytest

from src.cgrg_core import sample_graph
from src.config_loader import ModelParams
from src.empirical import LocalView, Measure, TypePair
from src.exporters import (
    MANIFEST_VERSION,
    build_manifest,
    load_distortion_table,
    parse_view,
    read_graph,
    render_atom,
    render_view,
    type_pair_to_dict,
    write_graph,
    write_kernel,
    write_manifest,
    write_measure,
    write_type_pair,
)
from src.limit_kernel import PoissonFiberKernel

ALPHABET = ("SG", "SI")


@pytest.fixture
def graph():
    """CGRG à deux couleurs, n = 60."""
    params = ModelParams(
        d=2,
        n=60,
        alphabet=list(ALPHABET),
        pi=[0.5, 0.5],
        **{"lambda": [[1.0, 1.0], [1.0, 1.0]]},
        seed=9,
    )
    return sample_graph(params)


def test_graph_round_trip(tmp_path, graph):
    """Test écriture puis relecture bit à bit."""
    path = write_graph(graph, tmp_path / "graph.txt")
    assert path.read_text().splitlines()[0] == "2 60 2"
    loaded = read_graph(path, ALPHABET)
    assert np.array_equal(loaded.points, graph.points)
    assert np.array_equal(loaded.colors, graph.colors)
    assert np.array_equal(loaded.edges, graph.edges)


def test_read_graph_alphabet_mismatch(tmp_path, graph):
    """Test alphabet de taille différente."""
    path = write_graph(graph, tmp_path / "graph.txt")
    with pytest.raises(ValueError, match="alphabet"):
        read_graph(path, ("SG",))


def test_render_and_parse_view():
    """Test forme canonique `couleur|c_1,…,c_k`."""
    view = LocalView(1, (3, 0))
    text = render_view(view, ALPHABET)
    assert text == "SI|3,0"
    assert parse_view(text, ALPHABET) == view


@pytest.mark.parametrize("text", ["XX|1,0", "SG|1", "SG|"])
def test_parse_view_invalid(text):
    """Test vues illisibles."""
    with pytest.raises(ValueError):
        parse_view(text, ALPHABET)


def test_render_atom_pairs():
    """Test paires de vues et paires de couleurs."""
    vx, vy = LocalView(0, (0, 1)), LocalView(1, (2, 2))
    assert render_atom((vx, vy), ALPHABET) == "SG|0,1;SI|2,2"
    assert render_atom((0, 1), ALPHABET) == "SG;SI"


def test_write_measure(tmp_path):
    """Test CSV atom_repr,weight."""
    mu = Measure([LocalView(0, (0, 0)), LocalView(1, (1, 0))], [0.75, 0.25], probability=True)
    count = write_measure(mu, tmp_path / "views.csv", ALPHABET)
    assert count == 2
    expected = 'atom_repr,weight\n"SG|0,0",0.75\n"SI|1,0",0.25\n'
    assert (tmp_path / "views.csv").read_text() == expected


def test_write_kernel(tmp_path):
    """Test CSV color,n_SG,n_SI,mass : une ligne par vue du support tronqué."""
    kernel = PoissonFiberKernel.from_arrays([0.5, 0.5], np.full((2, 2), 0.25), cap=1)
    count = write_kernel(kernel, tmp_path / "kernel.csv", ALPHABET)
    lines = (tmp_path / "kernel.csv").read_text().splitlines()
    assert count == 8
    assert lines[0] == "color,n_SG,n_SI,mass"
    assert lines[1].startswith("SG,0,0,")


def test_type_pair_json(tmp_path):
    """Test (π, ω) en JSON à 17 chiffres."""
    tp = TypePair(np.array([0.5, 0.5]), np.array([[0.1, 0.3], [0.3, 0.1]]))
    assert type_pair_to_dict(tp, ALPHABET)["consistent"] is True
    path = write_type_pair(tp, tmp_path / "type_pair.json", ALPHABET)
    data = json.loads(path.read_text())
    assert data["alphabet"] == ["SG", "SI"]
    assert data["pi"] == ["0.5", "0.5"]
    assert float(data["omega"][0][1]) == 0.3


def test_load_distortion_table_unquoted(tmp_path):
    """Test vues sans guillemets : colonnes décalées, rejet."""
    path = tmp_path / "table.csv"
    path.write_text("view_x,view_y,value\nSG|0,0,SI|0,0,1\nSI|0,0,SG|0,0,1\n")
    with pytest.raises(ValueError):
        load_distortion_table(path, ALPHABET)


def test_load_distortion_table_quoted(tmp_path):
    """Test vues entre guillemets (virgules internes)."""
    path = tmp_path / "table.csv"
    path.write_text('view_x,view_y,value\n"SG|0,1","SI|1,0",2.5\n')
    table = load_distortion_table(path, ALPHABET)
    assert table == {(LocalView(0, (0, 1)), LocalView(1, (1, 0))): 2.5}


def test_load_distortion_table_duplicate(tmp_path):
    """Test entrée dupliquée."""
    path = tmp_path / "table.csv"
    path.write_text('view_x,view_y,value\n"SG|0,1","SI|1,0",2.5\n"SG|0,1","SI|1,0",1\n')
    with pytest.raises(ValueError, match="Duplicate"):
        load_distortion_table(path, ALPHABET)


def test_manifest(tmp_path):
    """Test manifeste : version, graines, sorties triées, clés triées."""
    manifest = build_manifest({"experiment": "generate"}, {"model": 7}, ["b.csv", "a.csv"])
    assert manifest["manifest_version"] == MANIFEST_VERSION
    assert manifest["outputs"] == ["a.csv", "b.csv"]
    path = write_manifest(manifest, tmp_path / "manifest.json")
    assert json.loads(path.read_text()) == manifest
