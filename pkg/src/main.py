"""
Point d'entrée principal de la boîte à outils cgrg-lossy-aep.
Charge la configuration, lance l'expérience demandée et écrit le manifeste.

Codes de sortie : 0 succès, 2 configuration ou jeu WSN invalide, 3 paramètres
infaisables ou échec numérique, 4 erreur d'entrée/sortie.
"""

import argparse
import sys
from pathlib import Path
from typing import Sequence

import yaml
from pydantic import ValidationError

from src.config_loader import EXPERIMENTS, SamplingConfig, RunConfig, load_config
from src.exporters import build_manifest, write_manifest
from src.logger import bind_run_context, get_logger, setup_logger
from src.pipelines import EXPERIMENT_RUNNERS
from src.report_builder import ReportBuilder
from src.utils import ensure_directory_exists, resolve_output_path
from src.wsn_app import DatasetFormatError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4

MANIFEST_NAME = "manifest.json"
SUMMARY_NAME = "summary.txt"

logger = get_logger(__name__)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default="config/config.yaml", help="YAML config or run manifest")
    common.add_argument("--seed", type=int, default=None, help="override model.seed (u64)")
    common.add_argument("--threads", type=int, default=None, help="cap on worker threads")
    common.add_argument("--out", default=None, help="override output.directory")

    parser = argparse.ArgumentParser(
        prog="cgrg-aep",
        description="Colored geometric random graphs: empirical measures and lossy AEP numerics",
    )
    subparsers = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        subparsers.add_parser(name, parents=[common])
    return parser


def apply_overrides(
    config: RunConfig,
    experiment: str,
    seed: int | None = None,
    threads: int | None = None,
    out: str | None = None,
) -> RunConfig:
    """Applique la sous-commande et les options globales ; chaque section est revalidée."""
    update: dict = {"experiment": experiment}
    if seed is not None:
        update["model"] = config.model.with_updates(seed=seed)
    if threads is not None:
        update["sampling"] = SamplingConfig(**{**config.sampling.model_dump(), "threads": threads})
    if out is not None:
        update["output"] = config.output.model_copy(update={"directory": Path(out)})
    return config.model_copy(update=update)


def run(config: RunConfig) -> int:
    """
    Exécute l'expérience configurée et écrit ses artefacts plus le manifeste.

    Returns:
        EXIT_OK

    Raises:
        ValueError, ArithmeticError: paramètres infaisables
        OSError: échec d'écriture
    """
    out_dir = Path(config.output.directory)
    if not ensure_directory_exists(out_dir):
        raise OSError(f"Cannot create output directory: {out_dir}")

    bind_run_context(experiment=config.experiment, seed=config.model.seed)
    logger.info("run_started", n=config.model.n, d=config.model.d, output=str(out_dir))

    result = EXPERIMENT_RUNNERS[config.experiment](config, out_dir)

    summary = ReportBuilder().build_run_summary(config.experiment, result.metrics, result.outputs)
    resolve_output_path(out_dir, SUMMARY_NAME).write_text(summary, encoding="utf-8")
    manifest = build_manifest(
        config.resolved(),
        seeds={"model": config.model.seed},
        outputs=[*result.outputs, SUMMARY_NAME],
    )
    write_manifest(manifest, resolve_output_path(out_dir, MANIFEST_NAME))

    logger.info("run_finished", outputs=len(result.outputs), **result.metrics)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    try:
        config = apply_overrides(
            load_config(args.config), args.experiment, args.seed, args.threads, args.out
        )
    except (ValidationError, yaml.YAMLError, FileNotFoundError, ValueError) as e:
        print(f"❌ Erreur chargement configuration : {e}", file=sys.stderr)
        return EXIT_CONFIG

    setup_logger(config.logging.level, config.logging.format)

    try:
        return run(config)
    except DatasetFormatError as e:
        logger.error("run_input_invalid", error=str(e))
        return EXIT_CONFIG
    except (ValueError, ArithmeticError) as e:
        logger.error("run_infeasible", error=str(e))
        return EXIT_INFEASIBLE
    except MemoryError as e:
        logger.error(
            "run_support_too_large",
            error=str(e) or "out of memory",
            hint="lower distortion.cap or reduce the alphabet",
        )
        return EXIT_INFEASIBLE
    except OSError as e:
        logger.error("run_io_failed", error=str(e))
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
