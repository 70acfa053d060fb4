"""Figure rendering for evaluation reports: PNG files written next to the
delimited output.

Each renderer takes already-computed evaluation data and a target path, draws
with the non-interactive Agg backend, and returns the path it wrote.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  backend must be pinned first

from .errors import InvalidInputError
from .evaluation import ComparisonReport, HorizonTable


def _finish(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_error_histogram(bins: list[dict], path: str | Path,
                           title: str = "Absolute percentage error distribution") -> Path:
    """Bar chart from (bin, count) documents; bin values are left edges."""
    if not bins:
        raise InvalidInputError("no histogram bins to render")
    edges = [doc["bin"] for doc in bins]
    counts = [doc["count"] for doc in bins]
    width = min((b - a for a, b in zip(edges, edges[1:])), default=1.0)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(edges, counts, width=width * 0.95, align="edge", color="#33689c")
    ax.set_xlabel("absolute percentage error")
    ax.set_ylabel("hours")
    ax.set_title(title)
    return _finish(fig, path)


def render_horizon_curve(table: HorizonTable, path: str | Path,
                         title: str = "MAPE by forecast horizon") -> Path:
    """One line per country across the 1..24 hour horizons."""
    if not table.rows:
        raise InvalidInputError("no horizon rows to render")
    fig, ax = plt.subplots(figsize=(7, 4))
    horizons = table.horizons
    for country in table.countries:
        values = [table.rows[h].get(country) for h in horizons]
        points = [(h, v) for h, v in zip(horizons, values) if v is not None]
        if points:
            ax.plot([p[0] for p in points], [p[1] for p in points],
                    marker="o", markersize=3, label=country)
    ax.set_xlabel("horizon (hours)")
    ax.set_ylabel("MAPE (%)")
    ax.set_title(title)
    ax.legend(fontsize=8)
    return _finish(fig, path)


def render_monthly_comparison(report: ComparisonReport, country: str, path: str | Path,
                              title: str | None = None) -> Path:
    """Model vs benchmark monthly MAPE for one country; unavailable months
    leave gaps."""
    if country not in report.countries:
        raise InvalidInputError(f"country {country!r} not present in comparison report")
    positions = range(len(report.columns))
    fig, ax = plt.subplots(figsize=(7, 4))
    for label, table, color in (("model", report.model, "#33689c"),
                                ("benchmark", report.benchmark, "#c45b39")):
        pts = [(x, table.cell(country, column))
               for x, column in zip(positions, report.columns)]
        pts = [(x, v) for x, v in pts if v is not None]
        if pts:
            ax.plot([p[0] for p in pts], [p[1] for p in pts],
                    marker="o", markersize=4, label=label, color=color)
    ax.set_xticks(list(positions))
    ax.set_xticklabels(report.columns, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel("MAPE (%)")
    ax.set_title(title or f"Monthly MAPE, {country}")
    ax.legend(fontsize=8)
    return _finish(fig, path)


def render_pinball_by_quantile(by_quantile: dict, path: str | Path,
                               title: str = "Average pinball loss by quantile") -> Path:
    """Bar chart of mean pinball loss per forecast quantile level."""
    if not by_quantile:
        raise InvalidInputError("no per-quantile pinball losses to render")
    levels = sorted(by_quantile)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar([str(a) for a in levels], [by_quantile[a] for a in levels], color="#33689c")
    ax.set_xlabel("quantile level")
    ax.set_ylabel("pinball loss (MW)")
    ax.set_title(title)
    return _finish(fig, path)
