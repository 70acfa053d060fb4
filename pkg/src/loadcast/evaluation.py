"""Forecast evaluation: MAPE, pinball loss, error-distribution statistics,
monthly and per-horizon accuracy tables, benchmark comparison, and
back-testing of stored forecast records against actual loads.

All compute functions are pure; the render functions turn their results into
fixed-width text tables whose bytes depend only on the values, never on dict
insertion order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .errors import InvalidInputError
from .gbrt import percentile
from .records import ForecastRecord
from .series import LoadSeries, format_timestamp

STAT_KEYS = ("mean", "std", "min", "p25", "p50", "p75", "max")
UNAVAILABLE = "n/a"


# -- scalar metrics ---------------------------------------------------------

def abs_pct_errors(forecasts, actuals) -> np.ndarray:
    """100·|forecast − actual| / |actual| per pair; rejects zero actuals,
    which must be excluded upstream."""
    forecasts = np.asarray(forecasts, dtype=float)
    actuals = np.asarray(actuals, dtype=float)
    if forecasts.shape != actuals.shape or forecasts.ndim != 1:
        raise InvalidInputError("forecasts and actuals must be 1-D vectors of equal length")
    if forecasts.size == 0:
        raise InvalidInputError("no usable forecast/actual pairs")
    if not (np.isfinite(forecasts).all() and np.isfinite(actuals).all()):
        raise InvalidInputError("forecast/actual pairs must be finite")
    if np.any(actuals == 0.0):
        raise InvalidInputError("zero actuals must be excluded before computing errors")
    return 100.0 * np.abs(forecasts - actuals) / np.abs(actuals)


def mape(forecasts, actuals) -> float:
    return float(np.mean(abs_pct_errors(forecasts, actuals)))


def pinball(quantile_forecasts: dict, actual: float) -> float:
    """Average asymmetric quantile loss over the supplied quantile map.

    For one quantile level a with prediction q: (1 − a/100)·(q − y) when the
    observation y falls below q, else (a/100)·(y − q).
    """
    if not quantile_forecasts:
        raise InvalidInputError("empty quantile map")
    total = 0.0
    for a, q in quantile_forecasts.items():
        if not (isinstance(a, int) and 1 <= a <= 99):
            raise InvalidInputError(f"quantile level must be an integer in 1..99, got {a!r}")
        q = float(q)
        if not np.isfinite(q):
            raise InvalidInputError(f"quantile forecast for level {a} is not finite")
        if actual < q:
            total += (1.0 - a / 100.0) * (q - actual)
        else:
            total += (a / 100.0) * (actual - q)
    return total / len(quantile_forecasts)


def error_stats(values) -> dict:
    """Moments and quartiles of a non-empty vector, keyed like a stats table
    row: mean, std (sample, ddof=1 when possible), min, p25, p50, p75, max."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise InvalidInputError("error_stats of an empty vector")
    return {
        "mean": float(np.mean(arr)),
        "std": float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0,
        "min": float(np.min(arr)),
        "p25": percentile(arr, 25),
        "p50": percentile(arr, 50),
        "p75": percentile(arr, 75),
        "max": float(np.max(arr)),
    }


def histogram(values, bin_width: float = 1.0) -> list[dict]:
    """Fixed-width bins anchored at 0; one {bin, count} document per occupied
    bin, ordered by bin start."""
    arr = np.asarray(values, dtype=float)
    if bin_width <= 0:
        raise InvalidInputError("bin_width must be positive")
    counts: dict[int, int] = {}
    for value in arr:
        index = int(np.floor(value / bin_width))
        counts[index] = counts.get(index, 0) + 1
    return [{"bin": index * bin_width, "count": counts[index]}
            for index in sorted(counts)]


# -- joining stored forecasts to actuals -------------------------------------

def join_records(records: list[ForecastRecord], actuals: dict,
                 horizon: int | None = None) -> list[tuple[ForecastRecord, float]]:
    """Pair forecast records with the actual load at their target time.

    Keeps the newest issuance per (target_time, horizon), drops pairs whose
    actual is absent or zero, and optionally filters to one horizon.  Output
    is ordered by (target_time, horizon).
    """
    newest: dict[tuple, ForecastRecord] = {}
    for record in records:
        if horizon is not None and record.horizon != horizon:
            continue
        key = (record.target_time, record.horizon)
        current = newest.get(key)
        if current is None or record.issued_at > current.issued_at:
            newest[key] = record
    pairs = []
    for key in sorted(newest):
        record = newest[key]
        actual = actuals.get(record.target_time)
        if actual is None or actual == 0.0:
            continue
        pairs.append((record, actual))
    return pairs


def month_label(timestamp: datetime) -> str:
    return timestamp.astimezone(timezone.utc).strftime("%Y-%m")


# -- aggregate results --------------------------------------------------------

@dataclass(frozen=True)
class EvaluationResult:
    country: str
    period_start: datetime
    period_end: datetime
    horizon: int | None
    n_pairs: int
    mape: float
    monthly: dict  # month label -> MAPE
    stats: dict  # error_stats block over absolute percentage errors
    pinball_average: float | None = None
    pinball_by_quantile: dict | None = None  # level -> mean loss (MW)

    def to_doc(self) -> dict:
        doc = {
            "country": self.country,
            "period": {"start": format_timestamp(self.period_start),
                       "end": format_timestamp(self.period_end)},
            "horizon": self.horizon,
            "pairs": self.n_pairs,
            "mape": self.mape,
            "monthly_mape": dict(sorted(self.monthly.items())),
            "error_stats": {k: self.stats[k] for k in STAT_KEYS},
        }
        if self.pinball_average is not None:
            doc["pinball"] = {
                "average": self.pinball_average,
                "by_quantile": {str(a): v for a, v in sorted(self.pinball_by_quantile.items())},
                "quantiles": sorted(self.pinball_by_quantile),
            }
        return doc


def evaluate_records(country: str, records: list[ForecastRecord], actuals: dict,
                     horizon: int | None = None) -> EvaluationResult:
    """Back-test stored records against actuals: overall and per-month MAPE,
    error statistics, and pinball losses when decile forecasts are present."""
    pairs = join_records(records, actuals, horizon)
    if not pairs:
        raise InvalidInputError(
            f"no forecast/actual pairs to evaluate for {country!r}"
            + (f" at horizon {horizon}" if horizon is not None else ""))

    forecast_values = np.array([record.point for record, _ in pairs])
    actual_values = np.array([actual for _, actual in pairs])
    errors = abs_pct_errors(forecast_values, actual_values)

    by_month: dict[str, list[int]] = {}
    for position, (record, _) in enumerate(pairs):
        by_month.setdefault(month_label(record.target_time), []).append(position)
    monthly = {label: float(np.mean(errors[positions]))
               for label, positions in by_month.items()}

    pinball_average = None
    by_quantile = None
    decile_pairs = [(record, actual) for record, actual in pairs if record.deciles]
    if decile_pairs:
        per_observation = [pinball(record.deciles, actual) for record, actual in decile_pairs]
        pinball_average = float(np.mean(per_observation))
        levels = sorted({a for record, _ in decile_pairs for a in record.deciles})
        by_quantile = {}
        for a in levels:
            losses = [pinball({a: record.deciles[a]}, actual)
                      for record, actual in decile_pairs if a in record.deciles]
            by_quantile[a] = float(np.mean(losses))

    times = [record.target_time for record, _ in pairs]
    return EvaluationResult(country=country, period_start=min(times), period_end=max(times),
                            horizon=horizon, n_pairs=len(pairs),
                            mape=float(np.mean(errors)), monthly=monthly,
                            stats=error_stats(errors), pinball_average=pinball_average,
                            pinball_by_quantile=by_quantile)


def benchmark_result(country: str, series: LoadSeries) -> EvaluationResult | None:
    """Evaluate the published day-ahead forecast column against actuals on the
    same footing as the model back-test; None when no usable pairs exist."""
    pairs = [(obs.interval_start, obs.day_ahead_forecast, obs.actual_load)
             for obs in series.observations
             if obs.day_ahead_forecast is not None
             and obs.actual_load is not None and obs.actual_load != 0.0]
    if not pairs:
        return None
    times = [t for t, _, _ in pairs]
    forecasts = np.array([f for _, f, _ in pairs])
    actuals = np.array([a for _, _, a in pairs])
    errors = abs_pct_errors(forecasts, actuals)
    by_month: dict[str, list[int]] = {}
    for position, t in enumerate(times):
        by_month.setdefault(month_label(t), []).append(position)
    monthly = {label: float(np.mean(errors[positions]))
               for label, positions in by_month.items()}
    return EvaluationResult(country=country, period_start=min(times), period_end=max(times),
                            horizon=None, n_pairs=len(pairs), mape=float(np.mean(errors)),
                            monthly=monthly, stats=error_stats(errors))


# -- tables -------------------------------------------------------------------

@dataclass(frozen=True)
class MonthlyTable:
    """Countries × months accuracy table; None marks an unavailable cell."""

    columns: tuple[str, ...]
    rows: dict = field(default_factory=dict)  # country -> {month -> float | None}

    def cell(self, country: str, column: str) -> float | None:
        return self.rows.get(country, {}).get(column)

    @property
    def countries(self) -> list[str]:
        return sorted(self.rows)


def monthly_table(results: dict) -> MonthlyTable:
    """Assemble a MonthlyTable from per-country EvaluationResults; columns are
    the union of observed month labels in chronological order."""
    columns = sorted({label for result in results.values() for label in result.monthly})
    rows = {country: {label: result.monthly.get(label) for label in columns}
            for country, result in results.items()}
    return MonthlyTable(columns=tuple(columns), rows=rows)


@dataclass(frozen=True)
class ComparisonReport:
    """Model vs benchmark monthly MAPE with per-cell delta (model − benchmark);
    a cell missing on either side is flagged unavailable."""

    columns: tuple[str, ...]
    countries: tuple[str, ...]
    model: MonthlyTable
    benchmark: MonthlyTable

    def delta(self, country: str, column: str) -> float | None:
        m = self.model.cell(country, column)
        b = self.benchmark.cell(country, column)
        if m is None or b is None:
            return None
        return m - b

    def unavailable(self, country: str) -> list[str]:
        return [column for column in self.columns if self.delta(country, column) is None]

    def to_doc(self) -> dict:
        cells = {}
        for country in self.countries:
            cells[country] = {
                column: {"model": self.model.cell(country, column),
                         "benchmark": self.benchmark.cell(country, column),
                         "delta": self.delta(country, column)}
                for column in self.columns}
        return {"columns": list(self.columns), "countries": list(self.countries),
                "cells": cells}


def benchmark_compare(model: MonthlyTable, benchmark: MonthlyTable) -> ComparisonReport:
    if model.columns != benchmark.columns:
        raise InvalidInputError("model and benchmark tables must share month columns")
    countries = tuple(sorted(set(model.rows) | set(benchmark.rows)))
    return ComparisonReport(columns=model.columns, countries=countries,
                            model=model, benchmark=benchmark)


@dataclass(frozen=True)
class HorizonTable:
    """Horizons × countries MAPE table from horizon-filtered back-tests."""

    countries: tuple[str, ...]
    rows: dict  # horizon -> {country -> float | None}

    @property
    def horizons(self) -> list[int]:
        return sorted(self.rows)


def horizon_table(records: list[ForecastRecord], actuals_by_country: dict) -> HorizonTable:
    """MAPE grouped by (horizon, country).  `actuals_by_country` maps country
    code to its {target_time -> actual} map; cells with no usable pairs are
    None."""
    by_country: dict[str, list[ForecastRecord]] = {}
    for record in records:
        by_country.setdefault(record.country, []).append(record)
    countries = tuple(sorted(by_country))
    horizons = sorted({record.horizon for record in records})

    rows: dict[int, dict[str, float | None]] = {}
    for horizon in horizons:
        row: dict[str, float | None] = {}
        for country in countries:
            pairs = join_records(by_country[country],
                                 actuals_by_country.get(country, {}), horizon)
            if pairs:
                row[country] = mape([record.point for record, _ in pairs],
                                    [actual for _, actual in pairs])
            else:
                row[country] = None
        rows[horizon] = row
    return HorizonTable(countries=countries, rows=rows)


# -- text rendering -----------------------------------------------------------

def _format_cell(value: float | None, signed: bool = False) -> str:
    if value is None:
        return UNAVAILABLE
    return f"{value:+.3f}" if signed else f"{value:.3f}"


def _render_grid(header: list[str], body: list[list[str]]) -> str:
    widths = [len(h) for h in header]
    for row in body:
        for position, cell in enumerate(row):
            widths[position] = max(widths[position], len(cell))
    lines = []
    parts = [header[0].ljust(widths[0])] + [h.rjust(w) for h, w in zip(header[1:], widths[1:])]
    lines.append("  ".join(parts).rstrip())
    lines.append("  ".join("-" * w for w in widths))
    for row in body:
        parts = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
        lines.append("  ".join(parts).rstrip())
    return "\n".join(lines) + "\n"


def render_monthly_table(table: MonthlyTable, label: str = "Country") -> str:
    header = [label] + list(table.columns)
    body = [[country] + [_format_cell(table.cell(country, column)) for column in table.columns]
            for country in table.countries]
    return _render_grid(header, body)


def render_comparison(report: ComparisonReport) -> str:
    header = ["Country", "Series"] + list(report.columns)
    body = []
    for country in report.countries:
        body.append([country, "model"]
                    + [_format_cell(report.model.cell(country, c)) for c in report.columns])
        body.append(["", "benchmark"]
                    + [_format_cell(report.benchmark.cell(country, c)) for c in report.columns])
        body.append(["", "delta"]
                    + [_format_cell(report.delta(country, c), signed=True) for c in report.columns])
    return _render_grid(header, body)


def render_stats_table(stats_by_country: dict) -> str:
    header = ["Country"] + list(STAT_KEYS)
    body = [[country] + [_format_cell(stats_by_country[country][k]) for k in STAT_KEYS]
            for country in sorted(stats_by_country)]
    return _render_grid(header, body)


def render_horizon_table(table: HorizonTable) -> str:
    header = ["Horizon"] + list(table.countries)
    body = [[str(horizon)] + [_format_cell(table.rows[horizon][country])
                              for country in table.countries]
            for horizon in table.horizons]
    return _render_grid(header, body)
