"""
Tests pour les fonctions utilitaires.
"""

import math

import pytest

from src.utils import (
    ensure_directory_exists,
    format_cell,
    format_float,
    parse_float,
    read_csv_rows,
    resolve_output_path,
    write_csv_rows,
)


def test_format_float_seventeen_digits():
    """Test 17 chiffres significatifs : relecture exacte."""
    value = 0.1 + 0.2
    text = format_float(value)
    assert parse_float(text) == value
    assert text == "0.30000000000000004"


def test_format_float_infinity():
    """Test jeton 'inf' pour +∞."""
    assert format_float(math.inf) == "inf"
    assert format_float(-math.inf) == "-inf"
    assert parse_float("inf") == math.inf


def test_format_cell_bool_and_int():
    """Test rendu des booléens et entiers."""
    assert format_cell(True) == "true"
    assert format_cell(False) == "false"
    assert format_cell(3) == "3"
    assert format_cell(0.5) == "0.5"


def test_resolve_output_path_inside(tmp_path):
    """Test chemin dans le répertoire de sortie (sous-dossier créé)."""
    path = resolve_output_path(tmp_path, "sub/file.csv")
    assert path == (tmp_path / "sub" / "file.csv").resolve()
    assert path.parent.is_dir()


@pytest.mark.parametrize("name", ["../escape.csv", "/etc/passwd"])
def test_resolve_output_path_escape(tmp_path, name):
    """Test rejet d'un chemin hors du répertoire de sortie."""
    with pytest.raises(ValueError, match="escapes"):
        resolve_output_path(tmp_path / "out", name)


def test_ensure_directory_exists(tmp_path):
    """Test création de répertoire."""
    target = tmp_path / "a" / "b"
    assert ensure_directory_exists(target) is True
    assert target.is_dir()


def test_csv_write_read(tmp_path):
    """Test écriture puis relecture CSV avec en-tête."""
    path = tmp_path / "table.csv"
    count = write_csv_rows(path, ["alpha", "R"], [[0.1, math.inf], [0.5, 0.0]])
    assert count == 2
    assert path.read_text() == "alpha,R\n0.10000000000000001,inf\n0.5,0\n"
    header, rows = read_csv_rows(path)
    assert header == ["alpha", "R"]
    assert rows == [["0.10000000000000001", "inf"], ["0.5", "0"]]


def test_read_csv_missing(tmp_path):
    """Test CSV absent."""
    with pytest.raises(FileNotFoundError):
        read_csv_rows(tmp_path / "absent.csv")


def test_read_csv_empty(tmp_path):
    """Test CSV vide."""
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(ValueError, match="empty"):
        read_csv_rows(path)
