"""Data quality audit: per-column N/A and zero frequencies plus an overall
score, measured against the theoretical maximum number of reportable slots.

A slot that never appears in the series at all counts as N/A in both columns;
a reported zero counts as a zero issue.  The overall score pools both columns:
100 * (1 - bad_cells / (2 * expected_slots)).
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

from .countries import country_name
from .errors import InvalidInputError
from .series import LoadSeries, format_timestamp

_FREQUENCY_LABEL = {
    "hourly": "Hourly",
    "half-hourly": "Half-hourly",
    "quarter-hourly": "Quarter-hourly",
}


@dataclass
class QualityReport:
    country: str
    period_start: datetime
    period_end: datetime
    frequency: str
    expected_slots: int
    target_na: int
    target_zero: int
    forecast_na: int
    forecast_zero: int

    @property
    def bad_cells(self) -> int:
        return self.target_na + self.target_zero + self.forecast_na + self.forecast_zero

    @property
    def target_na_pct(self) -> float:
        return 100.0 * self.target_na / self.expected_slots

    @property
    def target_zero_pct(self) -> float:
        return 100.0 * self.target_zero / self.expected_slots

    @property
    def forecast_na_pct(self) -> float:
        return 100.0 * self.forecast_na / self.expected_slots

    @property
    def forecast_zero_pct(self) -> float:
        return 100.0 * self.forecast_zero / self.expected_slots

    @property
    def overall_score(self) -> float:
        return 100.0 * (1.0 - self.bad_cells / (2.0 * self.expected_slots))

    def to_doc(self) -> dict:
        return {
            "country": self.country,
            "country_name": country_name(self.country),
            "period_start": format_timestamp(self.period_start),
            "period_end": format_timestamp(self.period_end),
            "frequency": self.frequency,
            "expected_slots": self.expected_slots,
            "counts": {
                "target_na": self.target_na,
                "target_zero": self.target_zero,
                "forecast_na": self.forecast_na,
                "forecast_zero": self.forecast_zero,
            },
            "target_na_pct": self.target_na_pct,
            "target_zero_pct": self.target_zero_pct,
            "forecast_na_pct": self.forecast_na_pct,
            "forecast_zero_pct": self.forecast_zero_pct,
            "overall_score": self.overall_score,
        }


def audit(series: LoadSeries, period_start: datetime, period_end: datetime) -> QualityReport:
    """Count N/A and zero cells over every theoretical slot in the period.

    Slots start at period_start and step by the series interval; a trailing
    partial interval is not counted as a slot.
    """
    period_start = period_start.astimezone(timezone.utc)
    period_end = period_end.astimezone(timezone.utc)
    if period_end <= period_start:
        raise InvalidInputError("audit period is empty")
    interval = timedelta(minutes=series.interval_minutes)
    expected_slots = int((period_end - period_start) // interval)
    if expected_slots < 1:
        raise InvalidInputError("audit period is shorter than one reporting interval")

    by_start = {o.interval_start: o for o in series.observations}
    target_na = target_zero = forecast_na = forecast_zero = 0
    slot = period_start
    for _ in range(expected_slots):
        obs = by_start.get(slot)
        if obs is None:
            target_na += 1
            forecast_na += 1
        else:
            if obs.actual_load is None:
                target_na += 1
            elif obs.actual_load == 0:
                target_zero += 1
            if obs.day_ahead_forecast is None:
                forecast_na += 1
            elif obs.day_ahead_forecast == 0:
                forecast_zero += 1
        slot += interval

    return QualityReport(
        country=series.country,
        period_start=period_start,
        period_end=period_end,
        frequency=series.frequency,
        expected_slots=expected_slots,
        target_na=target_na,
        target_zero=target_zero,
        forecast_na=forecast_na,
        forecast_zero=forecast_zero,
    )


def render_report(reports: list[QualityReport]) -> str:
    """Fixed-width audit table, one row per country, ordered by country name.

    Issue percentages carry two decimals, the overall score one decimal.
    """
    if not reports:
        raise InvalidInputError("nothing to render: no quality reports")
    rows = []
    for report in sorted(reports, key=lambda r: (country_name(r.country), r.country)):
        rows.append((
            report.country,
            country_name(report.country),
            f"{report.target_na_pct:.2f}%",
            f"{report.target_zero_pct:.2f}%",
            f"{report.forecast_na_pct:.2f}%",
            f"{report.forecast_zero_pct:.2f}%",
            f"{report.overall_score:.1f}%",
            _FREQUENCY_LABEL[report.frequency],
        ))
    header = ("Code", "Country", "Target N/A", "Target 0",
              "Forecast N/A", "Forecast 0", "Score", "Frequency")
    widths = [max(len(header[i]), *(len(row[i]) for row in rows))
              for i in range(len(header))]
    lines = []
    lines.append("  ".join(header[i].ljust(widths[i]) for i in range(len(header))).rstrip())
    lines.append("  ".join("-" * widths[i] for i in range(len(header))))
    for row in rows:
        lines.append("  ".join(row[i].ljust(widths[i]) for i in range(len(header))).rstrip())
    return "\n".join(lines) + "\n"
