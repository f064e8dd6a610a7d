"""
Fonctions utilitaires pour la gestion des fichiers de sortie et le formatage des nombres.
"""

import csv
import math
import os
from pathlib import Path
from typing import Iterable, Sequence

from src.logger import get_logger

logger = get_logger(__name__)

INF_TOKEN = "inf"


# ------------------------------------------------------------------------
# Formatage
# ------------------------------------------------------------------------

def format_float(value: float) -> str:
    """
    Représentation texte stable d'un réel : 17 chiffres significatifs,
    `inf` pour +∞ (jeton documenté pour les consommateurs CSV).
    """
    value = float(value)
    if math.isinf(value):
        return INF_TOKEN if value > 0 else "-" + INF_TOKEN
    if math.isnan(value):
        return "nan"
    return format(value, ".17g")


def parse_float(text: str) -> float:
    """Inverse de format_float."""
    return float(text.strip())


def format_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_float(value)
    return str(value)


# ------------------------------------------------------------------------
# Chemins de sortie
# ------------------------------------------------------------------------

def resolve_output_path(output_dir: str | Path, filename: str) -> Path:
    """
    Construit le chemin d'un artefact en garantissant qu'il reste
    dans le répertoire de sortie configuré.

    Raises:
        ValueError: si le nom sort du répertoire (chemin absolu, '..')
    """
    base = Path(output_dir).resolve()
    target = (base / filename).resolve()
    if not target.is_relative_to(base):
        raise ValueError(f"Output path escapes output directory: {filename}")
    target.parent.mkdir(parents=True, exist_ok=True)
    return target


def ensure_directory_exists(directory: str | Path) -> bool:
    """S'assure qu'un répertoire existe, le crée si nécessaire."""
    try:
        os.makedirs(directory, exist_ok=True)
        return True
    except OSError as e:
        logger.error("directory_creation_failed", path=str(directory), error=str(e))
        return False


# ------------------------------------------------------------------------
# CSV
# ------------------------------------------------------------------------

def write_csv_rows(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> int:
    """
    Écrit un CSV avec en-tête ; les réels passent par format_float.

    Returns:
        Nombre de lignes de données écrites
    """
    count = 0
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(cell) for cell in row])
            count += 1
    logger.debug("csv_written", path=str(path), rows=count)
    return count


def read_csv_rows(path: str | Path) -> tuple[list[str], list[list[str]]]:
    """Lit un CSV avec en-tête ; retourne (en-tête, lignes)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"CSV file not found: {path}")
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        rows = [row for row in reader if row]
    if not rows:
        raise ValueError(f"CSV file is empty: {path}")
    return [h.strip() for h in rows[0]], rows[1:]
