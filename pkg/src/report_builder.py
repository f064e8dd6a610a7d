"""
Construction des rapports texte : ajustement WSN et résumé de run.
"""

from typing import TYPE_CHECKING, Dict, List, Sequence

import numpy as np

from src.logger import get_logger
from src.utils import format_float

if TYPE_CHECKING:
    from src.wsn_app import WsnFit

logger = get_logger(__name__)


def _format_vector(values: Sequence[float]) -> str:
    return "[" + ", ".join(format_float(v) for v in values) + "]"


def _format_matrix(matrix: np.ndarray, alphabet: Sequence[str]) -> List[str]:
    """Une ligne par couleur : `  a: [..]` ; les entrées NaN s'affichent `missing`."""
    lines = []
    for label, row in zip(alphabet, np.asarray(matrix).tolist()):
        cells = ["missing" if v != v else format_float(v) for v in row]
        lines.append(f"  {label}: [" + ", ".join(cells) + "]")
    return lines


class ReportBuilder:
    """Constructeur de rapports texte."""

    def build_fit_report(self, fit: "WsnFit") -> str:
        alphabet = fit.alphabet
        lines = [
            "# wsn-fit",
            f"nodes: {fit.params.n}",
            f"d: {fit.params.d}",
            f"alphabet: {', '.join(alphabet)}",
            f"pi_hat: {_format_vector(fit.pi_hat.tolist())}",
            "lambda_hat:",
            *_format_matrix(fit.lambda_hat, alphabet),
            "omega_hat:",
            *_format_matrix(fit.omega_hat, alphabet),
            f"threshold: {format_float(fit.threshold)}",
            f"residual: {format_float(fit.residual)}",
        ]
        if fit.missing:
            lines.append("missing: " + ", ".join(f"{a}-{b}" for a, b in fit.missing))

        lines.append("goodness_of_fit:")
        lines.append("  a,b,mean,statistic,dof,p_value,sample_size")
        for pair in fit.goodness:
            test = pair.test
            lines.append(
                "  "
                + ",".join(
                    [
                        pair.a,
                        pair.b,
                        format_float(pair.mean),
                        format_float(test.statistic),
                        str(test.dof),
                        format_float(test.p_value),
                        str(test.sample_size),
                    ]
                )
            )

        report = "\n".join(lines) + "\n"
        logger.debug("fit_report_built", nodes=fit.params.n, pairs=len(fit.goodness))
        return report

    def build_run_summary(self, experiment: str, metrics: Dict[str, float], outputs: Sequence[str]) -> str:
        """Résumé court d'un run : métriques principales puis fichiers produits."""
        lines = [f"# {experiment}"]
        for key, value in metrics.items():
            shown = format_float(value) if isinstance(value, float) else str(value)
            lines.append(f"{key}: {shown}")
        if outputs:
            lines.append("outputs:")
            lines.extend(f"  - {name}" for name in sorted(outputs))
        return "\n".join(lines) + "\n"
