"""Feature engineering: calendar variables in the country's local time plus
two lagged load values, with training-time drops and inference-time weekly
imputation ladders.

Training rows never impute: a missing lag drops the row.  Inference rows walk
back one week at a time (up to six attempts per lag); when a lag still cannot
be found the row degrades to the calendar-only basic kind, which is the
signal to serve the fallback model.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from zoneinfo import ZoneInfo

import numpy as np

from .countries import country_zone
from .errors import ConfigurationError, InsufficientDataError, InvalidInputError
from .series import HOUR, LoadSeries

BASIC = "basic"
ADVANCED = "advanced"

BASIC_FEATURES = ("hour_of_day", "day_of_week", "day_of_month", "month", "is_holiday")
ADVANCED_FEATURES = BASIC_FEATURES + ("lag_week", "lag_last_known")

WEEK = timedelta(hours=168)
LADDER_ATTEMPTS = 6


@dataclass(frozen=True)
class Calendar:
    """Per-country local-time context: zone plus holiday dates."""

    country: str
    timezone: ZoneInfo
    holidays: frozenset = frozenset()

    @classmethod
    def for_country(cls, country: str, holidays=(), zone_override: str | None = None) -> "Calendar":
        return cls(country=country, timezone=country_zone(country, zone_override),
                   holidays=frozenset(holidays))


def load_holidays(path: str | Path) -> frozenset:
    """Holiday file: one ISO date per line, '#' starts a comment."""
    dates = set()
    for number, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        try:
            dates.add(date.fromisoformat(text))
        except ValueError:
            raise ConfigurationError(
                f"{path} line {number}: not an ISO date: {text!r}") from None
    return frozenset(dates)


def calendar_features(timestamp: datetime, calendar: Calendar) -> dict:
    """Local-clock calendar fields at one instant: hour 0-23, weekday
    (Monday=0), day of month, month, holiday flag."""
    if timestamp.tzinfo is None:
        raise InvalidInputError("timestamp carries no zone")
    local = timestamp.astimezone(calendar.timezone)
    return {
        "hour_of_day": local.hour,
        "day_of_week": local.weekday(),
        "day_of_month": local.day,
        "month": local.month,
        "is_holiday": int(local.date() in calendar.holidays),
    }


@dataclass(frozen=True)
class FeatureRow:
    target_time: datetime
    horizon: int
    kind: str
    hour_of_day: int
    day_of_week: int
    day_of_month: int
    month: int
    is_holiday: int
    lag_week: float | None = None
    lag_last_known: float | None = None

    def __post_init__(self):
        if not 1 <= self.horizon <= 24:
            raise InvalidInputError(f"horizon must be in 1..24, got {self.horizon!r}")
        if self.kind == ADVANCED:
            for label, value in (("lag_week", self.lag_week),
                                 ("lag_last_known", self.lag_last_known)):
                if value is None or not np.isfinite(value):
                    raise InvalidInputError(f"advanced row requires a finite {label}")
        elif self.kind == BASIC:
            if self.lag_week is not None or self.lag_last_known is not None:
                raise InvalidInputError("basic rows carry calendar features only")
        else:
            raise InvalidInputError(f"unknown row kind {self.kind!r}")

    @property
    def feature_names(self) -> tuple[str, ...]:
        return ADVANCED_FEATURES if self.kind == ADVANCED else BASIC_FEATURES

    def vector(self, kind: str | None = None) -> list[float]:
        """Feature values in schema order; a basic vector can always be cut
        from an advanced row, never the other way around."""
        kind = kind or self.kind
        base = [float(self.hour_of_day), float(self.day_of_week),
                float(self.day_of_month), float(self.month), float(self.is_holiday)]
        if kind == BASIC:
            return base
        if self.kind != ADVANCED:
            raise InvalidInputError("cannot build an advanced vector from a basic row")
        return base + [float(self.lag_week), float(self.lag_last_known)]


def rows_to_matrix(rows: list[FeatureRow], kind: str) -> np.ndarray:
    return np.array([row.vector(kind) for row in rows], dtype=float)


def _make_row(target_time: datetime, horizon: int, kind: str, calendar: Calendar,
              lag_week: float | None = None, lag_last_known: float | None = None) -> FeatureRow:
    parts = calendar_features(target_time, calendar)
    return FeatureRow(target_time=target_time, horizon=horizon, kind=kind,
                      lag_week=lag_week, lag_last_known=lag_last_known, **parts)


def build_training_rows(series: LoadSeries, calendar: Calendar, horizon: int,
                        kind: str = ADVANCED) -> tuple[list[FeatureRow], np.ndarray]:
    """One row per hour with a present actual load (the target).

    Advanced rows additionally need the load one week before the target and
    the last load known at issuance time (target minus horizon); a row missing
    either lag is discarded entirely.
    """
    if series.frequency != "hourly":
        raise InvalidInputError("training rows require an hourly series")
    if not 1 <= horizon <= 24:
        raise InvalidInputError(f"horizon must be in 1..24, got {horizon!r}")
    if kind not in (BASIC, ADVANCED):
        raise InvalidInputError(f"unknown row kind {kind!r}")

    actuals = series.actuals_by_time()
    rows: list[FeatureRow] = []
    targets: list[float] = []
    candidates = 0
    dropped = 0
    for obs in series.observations:
        if obs.actual_load is None:
            continue
        candidates += 1
        t = obs.interval_start
        if kind == ADVANCED:
            lag_week = actuals.get(t - WEEK)
            lag_last_known = actuals.get(t - horizon * HOUR)
            if lag_week is None or lag_last_known is None:
                dropped += 1
                continue
            rows.append(_make_row(t, horizon, ADVANCED, calendar,
                                  lag_week=lag_week, lag_last_known=lag_last_known))
        else:
            rows.append(_make_row(t, horizon, BASIC, calendar))
        targets.append(obs.actual_load)

    if not rows:
        raise InsufficientDataError(
            f"no {kind} training rows for {series.country} at horizon {horizon}",
            detail={"country": series.country, "horizon": horizon, "kind": kind,
                    "target_hours": candidates, "dropped_missing_lags": dropped})
    return rows, np.asarray(targets, dtype=float)


def build_inference_row(series: LoadSeries, calendar: Calendar,
                        target_time: datetime, horizon: int) -> FeatureRow:
    """Feature row for one future hour, with weekly imputation ladders.

    lag_week is sought at t-168h, then t-336h, ... six attempts; the last
    known load at t-horizon, stepping back a week per attempt, six attempts.
    If either lag stays missing the row comes back basic-kind (the fallback
    signal) instead of failing.
    """
    if series.frequency != "hourly":
        raise InvalidInputError("inference rows require an hourly series")
    if not 1 <= horizon <= 24:
        raise InvalidInputError(f"horizon must be in 1..24, got {horizon!r}")
    if target_time.tzinfo is None:
        raise InvalidInputError("target_time carries no zone")
    target_time = target_time.astimezone(timezone.utc)

    actuals = series.actuals_by_time()
    lag_week = None
    for k in range(1, LADDER_ATTEMPTS + 1):
        lag_week = actuals.get(target_time - k * WEEK)
        if lag_week is not None:
            break
    lag_last_known = None
    for k in range(LADDER_ATTEMPTS):
        lag_last_known = actuals.get(target_time - horizon * HOUR - k * WEEK)
        if lag_last_known is not None:
            break

    if lag_week is None or lag_last_known is None:
        return _make_row(target_time, horizon, BASIC, calendar)
    return _make_row(target_time, horizon, ADVANCED, calendar,
                     lag_week=lag_week, lag_last_known=lag_last_known)
