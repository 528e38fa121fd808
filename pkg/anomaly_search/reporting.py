"""CSV and plot output for summary rows."""
import csv
import logging
from pathlib import Path
from typing import Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from anomaly_search.models import SummaryRow  # noqa: E402

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "policy", "b", "trials", "p_fa", "p_fa_lo", "p_fa_hi",
    "mean_tau", "mean_switches", "mean_tau_tilde", "mean_tau_lambda", "se_tau", "capped",
)
_FIELD_FOR_COLUMN = {"capped": "capped_count"}
_INT_COLUMNS = {"trials", "capped"}


def _format(value: object) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def emit_csv(rows: Sequence[SummaryRow], path: Union[str, Path]) -> Path:
    """Write ``rows`` as UTF-8 CSV with LF line endings and 17 significant digits.

    Raises:
        ValueError: ``rows`` is empty.
        OSError: the path cannot be written.
    """
    if not rows:
        raise ValueError("no rows to write")
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_format(getattr(row, _FIELD_FOR_COLUMN.get(c, c))) for c in CSV_COLUMNS])
    logger.info("[report] wrote %d rows to %s", len(rows), path)
    return path


def read_csv(path: Union[str, Path]) -> list[SummaryRow]:
    """Parse a file written by ``emit_csv`` back into summary rows."""
    with Path(path).open(encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        rows = []
        for record in reader:
            values: dict[str, object] = {}
            for column in CSV_COLUMNS:
                raw = record[column]
                field = _FIELD_FOR_COLUMN.get(column, column)
                if column == "policy":
                    values[field] = raw
                elif column in _INT_COLUMNS:
                    values[field] = int(raw)
                else:
                    values[field] = float(raw)
            rows.append(SummaryRow(**values))
    return rows


def emit_plot(rows: Sequence[SummaryRow], path: Union[str, Path]) -> Path:
    """Plot mean tau~ against P_FA, one series per policy.

    The format follows the file suffix; SVG is the intended vector output.
    P_FA goes on a log axis when every plotted value is positive.
    """
    if not rows:
        raise ValueError("no rows to plot")
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6, 4))
    try:
        positive = True
        for policy in sorted({r.policy for r in rows}):
            series = sorted((r for r in rows if r.policy == policy), key=lambda r: r.b)
            x = [r.p_fa for r in series]
            positive = positive and all(v > 0 for v in x)
            ax.plot(x, [r.mean_tau_tilde for r in series], marker="o", label=policy)
        if positive:
            ax.set_xscale("log")
        ax.set_xlabel("false-alarm probability")
        ax.set_ylabel("mean delay incl. switches")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
        fig.tight_layout()
        fig.savefig(path)
    finally:
        plt.close(fig)
    logger.info("[report] wrote plot to %s", path)
    return path
