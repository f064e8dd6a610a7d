"""
Configuration loader avec validation Pydantic.
Charge et valide le fichier config.yaml (ou un manifeste de run JSON).
"""

import math
from pathlib import Path
from typing import Literal

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

EXPERIMENTS = (
    "generate",
    "stats",
    "slln-check",
    "cumulant",
    "rd-curve",
    "ball-exponent",
    "wsn-fit",
)

ExperimentName = Literal[
    "generate",
    "stats",
    "slln-check",
    "cumulant",
    "rd-curve",
    "ball-exponent",
    "wsn-fit",
]

MAX_SEED = 2**64 - 1


class ModelParams(BaseModel):
    """Paramètres du modèle CGRG : dimension, taille, alphabet, loi des couleurs, noyau λ."""

    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    d: int = Field(..., ge=1)
    n: int = Field(..., ge=1)
    alphabet: tuple[str, ...] = Field(..., min_length=1)
    pi: tuple[float, ...]
    lam: tuple[tuple[float, ...], ...] = Field(..., alias="lambda")
    seed: int = Field(..., ge=0, le=MAX_SEED)
    exact_composition: bool = False

    @field_validator("alphabet")
    @classmethod
    def validate_alphabet(cls, v: tuple[str, ...]) -> tuple[str, ...]:
        """Les couleurs doivent être distinctes et ne pas contenir les séparateurs CSV."""
        if len(set(v)) != len(v):
            raise ValueError("Alphabet labels must be distinct")
        for label in v:
            if not label or any(ch in label for ch in "|,; \t\n"):
                raise ValueError(f"Invalid color label: {label!r}")
        return v

    @model_validator(mode="after")
    def validate_laws(self) -> "ModelParams":
        """Vérifie π (probabilité) et λ (symétrique, positive) sur 𝒳×𝒳."""
        k = len(self.alphabet)
        if len(self.pi) != k:
            raise ValueError("pi must have one entry per color")
        if any(p < 0 or not math.isfinite(p) for p in self.pi):
            raise ValueError("pi entries must be finite and nonnegative")
        if abs(math.fsum(self.pi) - 1.0) > 1e-12:
            raise ValueError("pi must sum to 1 within 1e-12")
        if len(self.lam) != k or any(len(row) != k for row in self.lam):
            raise ValueError("lambda must be a |X| x |X| matrix")
        for a in range(k):
            for b in range(k):
                value = self.lam[a][b]
                if value < 0 or not math.isfinite(value):
                    raise ValueError("lambda entries must be finite and nonnegative")
                if value != self.lam[b][a]:
                    raise ValueError("lambda must be exactly symmetric")
        return self

    @property
    def k(self) -> int:
        return len(self.alphabet)

    def pi_array(self) -> np.ndarray:
        return np.asarray(self.pi, dtype=float)

    def lambda_array(self) -> np.ndarray:
        return np.asarray(self.lam, dtype=float)

    def with_updates(self, **changes) -> "ModelParams":
        """Copie validée avec quelques champs modifiés (n, seed...)."""
        data = self.model_dump(by_alias=True)
        data.update(changes)
        return ModelParams(**data)


class DistortionConfig(BaseModel):
    """Fonction de distorsion à une lettre σ."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["hamming_color", "squared_degree", "table", "constant"] = "hamming_color"
    cap: int = Field(default=30, ge=1)
    table_path: Path | None = None
    value: float = Field(default=0.0, ge=0.0)

    @model_validator(mode="after")
    def validate_table(self) -> "DistortionConfig":
        if self.kind == "table" and self.table_path is None:
            raise ValueError("distortion.table_path is required for kind 'table'")
        return self


class SamplingConfig(BaseModel):
    """Tailles Monte Carlo, grilles et réglages numériques."""

    model_config = ConfigDict(extra="forbid")

    outer: int = Field(default=50, ge=1)
    inner: int = Field(default=2000, ge=1)
    replicates: int = Field(default=20, ge=1)
    t_grid: list[float] = Field(default_factory=lambda: [-1.0, 0.5, 1.0])
    alpha_grid: list[float] = Field(default_factory=list)
    alpha_points: int = Field(default=21, ge=2)
    n_ladder: list[int] = Field(default_factory=lambda: [500, 2000, 8000])
    ball_alpha: float | None = Field(default=None, ge=0.0)
    ball_inner: int = Field(default=100_000, ge=1)
    tau: float | None = Field(default=None, gt=0.0)
    shared_geometry: bool = False
    alpha_min_diagnostic: bool = False
    t_max: float = Field(default=200.0, gt=0.0)
    threads: int = Field(default=1, ge=1)

    @field_validator("alpha_grid")
    @classmethod
    def validate_alpha_grid(cls, v: list[float]) -> list[float]:
        if any(a < 0 for a in v):
            raise ValueError("alpha_grid values must be nonnegative")
        if v != sorted(v):
            raise ValueError("alpha_grid must be sorted ascending")
        return v

    @field_validator("n_ladder")
    @classmethod
    def validate_n_ladder(cls, v: list[int]) -> list[int]:
        if not v or any(n < 1 for n in v):
            raise ValueError("n_ladder must contain positive sizes")
        return v


class OutputConfig(BaseModel):
    """Répertoire de sortie des artefacts."""

    model_config = ConfigDict(extra="forbid")

    directory: Path = Path("output")


class LoggingConfig(BaseModel):
    """Configuration des logs."""

    model_config = ConfigDict(extra="forbid")

    level: str = Field(default="info", pattern="^(debug|info|warning|error)$")
    format: str = Field(default="json", pattern="^(json|console)$")


class WsnConfig(BaseModel):
    """Données de réseau de capteurs (SG/SI) à ajuster."""

    model_config = ConfigDict(extra="forbid")

    nodes_csv: Path | None = None
    links_csv: Path | None = None

    @model_validator(mode="after")
    def validate_pair(self) -> "WsnConfig":
        if (self.nodes_csv is None) != (self.links_csv is None):
            raise ValueError("wsn.nodes_csv and wsn.links_csv must be given together")
        return self


class RunConfig(BaseSettings):
    """Configuration principale d'un run."""

    model_config = SettingsConfigDict(
        env_prefix="CGRG_",
        env_nested_delimiter="__",
        extra="forbid",
    )

    experiment: ExperimentName = "generate"
    model: ModelParams
    distortion: DistortionConfig = DistortionConfig()
    sampling: SamplingConfig = SamplingConfig()
    output: OutputConfig = OutputConfig()
    logging: LoggingConfig = LoggingConfig()
    wsn: WsnConfig = WsnConfig()

    def resolved(self) -> dict:
        """Configuration complète, sérialisable (pour le manifeste)."""
        return self.model_dump(mode="json", by_alias=True)


def load_config(config_path: str | Path = "config/config.yaml") -> RunConfig:
    """
    Charge et valide le fichier de configuration YAML.

    Un manifeste de run (JSON, clé `manifest_version`) est aussi accepté :
    son bloc `config` est rejoué tel quel.

    Args:
        config_path: Chemin vers le fichier config.yaml ou manifest.json

    Returns:
        RunConfig: Configuration validée

    Raises:
        FileNotFoundError: Si le fichier n'existe pas
        ValueError: Si la configuration est invalide
    """
    path = Path(config_path)

    if not path.exists():
        raise FileNotFoundError(f"Configuration file not found: {config_path}")

    with open(path, "r", encoding="utf-8") as f:
        config_data = yaml.safe_load(f)

    if not isinstance(config_data, dict):
        raise ValueError(f"Configuration root must be a mapping: {config_path}")

    if "manifest_version" in config_data:
        config_data = config_data["config"]

    return RunConfig(**config_data)
