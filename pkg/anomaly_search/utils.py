"""Console and logging helpers shared by the command-line tools."""

import logging
from typing import Iterable

from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from anomaly_search.models import SummaryRow

console = Console()
err_console = Console(stderr=True)


def configure_logging(level: str = "INFO") -> None:
    """Route every ``anomaly_search`` logger through a rich handler on stderr."""
    logging.basicConfig(
        level=level.upper(),
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=err_console, show_path=False)],
        force=True,
    )


def summary_table(rows: Iterable[SummaryRow], title: str = "Results") -> Table:
    """Render summary rows as a rich table.

    Args:
        rows: aggregated (policy, b) rows
        title: table caption (default: "Results")
    """
    table = Table(title=title)
    for header in ("policy", "b", "P_FA", "95% CI", "E[tau]", "E[switches]", "E[tau~]", "capped"):
        table.add_column(header, justify="left" if header == "policy" else "right")
    for row in rows:
        table.add_row(
            row.policy,
            f"{row.b:.4g}",
            f"{row.p_fa:.4f}",
            f"[{row.p_fa_lo:.4f}, {row.p_fa_hi:.4f}]",
            f"{row.mean_tau:.2f}",
            f"{row.mean_switches:.2f}",
            f"{row.mean_tau_tilde:.2f}",
            str(row.capped_count),
        )
    return table


def key_value_table(pairs: Iterable[tuple[str, object]], title: str) -> Table:
    table = Table(title=title, show_header=False)
    table.add_column("quantity", style="bold")
    table.add_column("value", justify="right")
    for key, value in pairs:
        table.add_row(key, f"{value:.6g}" if isinstance(value, float) else str(value))
    return table
