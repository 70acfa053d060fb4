"""Load time series types and transforms: frequency detection, hourly
aggregation, and merging of the two actual-load sources.

All timestamps are normalized to UTC on construction; local clock conventions
(DST days with 23 or 25 hours) never produce duplicate or missing keys
because every key is a UTC hour.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

from .errors import InvalidInputError

TOTAL_LOAD = "total_load"
VERTICAL_LOAD = "vertical_load"
SOURCES = (TOTAL_LOAD, VERTICAL_LOAD)

# frequency name -> interval minutes
FREQUENCY_MINUTES = {"hourly": 60, "half-hourly": 30, "quarter-hourly": 15}
MINUTES_FREQUENCY = {m: name for name, m in FREQUENCY_MINUTES.items()}

HOUR = timedelta(hours=1)

# Total-load actuals only exist from this instant on; earlier hours fall back
# to vertical load when merging.
DEFAULT_SOURCE_CUTOFF = datetime(2015, 1, 1, tzinfo=timezone.utc)


def parse_timestamp(text: str) -> datetime:
    """ISO-8601 with offset, normalized to UTC.  Trailing 'Z' accepted."""
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    try:
        stamp = datetime.fromisoformat(raw)
    except ValueError as exc:
        raise InvalidInputError(f"malformed timestamp {text!r}: {exc}") from None
    if stamp.tzinfo is None:
        raise InvalidInputError(f"timestamp {text!r} carries no UTC offset")
    return stamp.astimezone(timezone.utc)


def format_timestamp(stamp: datetime) -> str:
    return stamp.astimezone(timezone.utc).isoformat()


def truncate_to_hour(stamp: datetime) -> datetime:
    return stamp.astimezone(timezone.utc).replace(minute=0, second=0, microsecond=0)


@dataclass(frozen=True)
class LoadObservation:
    """One reported interval: optional day-ahead forecast and actual load (MW)."""

    country: str
    interval_start: datetime
    interval_end: datetime
    day_ahead_forecast: float | None = None
    actual_load: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "interval_start", self.interval_start.astimezone(timezone.utc))
        object.__setattr__(self, "interval_end", self.interval_end.astimezone(timezone.utc))
        if self.interval_end <= self.interval_start:
            raise InvalidInputError(
                f"interval_end must follow interval_start, got {self.interval_start} .. {self.interval_end}")
        if self.interval_minutes not in MINUTES_FREQUENCY:
            raise InvalidInputError(
                f"interval length must be 15, 30 or 60 minutes, got {self.interval_minutes}")
        for label, value in (("day_ahead_forecast", self.day_ahead_forecast),
                             ("actual_load", self.actual_load)):
            if value is None:
                continue
            if not isinstance(value, (int, float)) or value != value or value in (float("inf"), float("-inf")):
                raise InvalidInputError(f"{label} must be finite, got {value!r}")
            if value < 0:
                raise InvalidInputError(f"{label} must be >= 0, got {value!r}")

    @property
    def interval_minutes(self) -> int:
        return int((self.interval_end - self.interval_start).total_seconds() // 60)


@dataclass
class LoadSeries:
    """Strictly ordered, gap-tolerant, uniform-interval series for one country."""

    country: str
    frequency: str
    observations: list[LoadObservation] = field(default_factory=list)
    source: str = TOTAL_LOAD

    def __post_init__(self):
        if self.frequency not in FREQUENCY_MINUTES:
            raise InvalidInputError(f"unknown frequency {self.frequency!r}")
        if self.source not in SOURCES:
            raise InvalidInputError(f"unknown source {self.source!r}")
        minutes = FREQUENCY_MINUTES[self.frequency]
        previous = None
        for obs in self.observations:
            if obs.country != self.country:
                raise InvalidInputError(
                    f"observation country {obs.country!r} differs from series country {self.country!r}")
            if obs.interval_minutes != minutes:
                raise InvalidInputError(
                    f"observation at {obs.interval_start} has a {obs.interval_minutes}-minute "
                    f"interval in a {self.frequency} series")
            if previous is not None and obs.interval_start <= previous:
                raise InvalidInputError(
                    f"observations not strictly ordered at {obs.interval_start}")
            previous = obs.interval_start

    def __len__(self) -> int:
        return len(self.observations)

    @property
    def interval_minutes(self) -> int:
        return FREQUENCY_MINUTES[self.frequency]

    def span(self) -> tuple[datetime, datetime] | None:
        if not self.observations:
            return None
        return (self.observations[0].interval_start, self.observations[-1].interval_end)

    def actuals_by_time(self) -> dict[datetime, float]:
        """interval_start -> actual load, present values only."""
        return {o.interval_start: o.actual_load
                for o in self.observations if o.actual_load is not None}

    def forecasts_by_time(self) -> dict[datetime, float]:
        return {o.interval_start: o.day_ahead_forecast
                for o in self.observations if o.day_ahead_forecast is not None}

    def to_doc(self) -> dict:
        return {
            "country": self.country,
            "frequency": self.frequency,
            "source": self.source,
            "observations": [
                {
                    "interval_start": format_timestamp(o.interval_start),
                    "interval_end": format_timestamp(o.interval_end),
                    "day_ahead_forecast": o.day_ahead_forecast,
                    "actual_load": o.actual_load,
                }
                for o in self.observations
            ],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "LoadSeries":
        country = doc["country"]
        observations = [
            LoadObservation(
                country=country,
                interval_start=parse_timestamp(o["interval_start"]),
                interval_end=parse_timestamp(o["interval_end"]),
                day_ahead_forecast=o.get("day_ahead_forecast"),
                actual_load=o.get("actual_load"),
            )
            for o in doc["observations"]
        ]
        return cls(country=country, frequency=doc["frequency"],
                   observations=observations, source=doc.get("source", TOTAL_LOAD))


def detect_frequency(series: LoadSeries) -> str:
    """Modal interval length mapped to a frequency name."""
    if len(series.observations) < 2:
        raise InvalidInputError("frequency detection needs at least 2 observations")
    lengths = Counter(o.interval_minutes for o in series.observations)
    modal, _ = lengths.most_common(1)[0]
    if modal not in MINUTES_FREQUENCY:
        raise InvalidInputError(f"unsupported reporting frequency: {modal}-minute intervals")
    return MINUTES_FREQUENCY[modal]


def aggregate_to_hourly(series: LoadSeries) -> LoadSeries:
    """Mean of sub-hourly values per UTC clock hour; any absent sub-value
    makes the hour's value absent.  Hourly input is returned unchanged."""
    if series.frequency == "hourly":
        return series
    slots_per_hour = 60 // series.interval_minutes
    by_hour: dict[datetime, list[LoadObservation]] = {}
    for obs in series.observations:
        by_hour.setdefault(truncate_to_hour(obs.interval_start), []).append(obs)

    def column_mean(values: list[float | None], covered: int) -> float | None:
        if covered < slots_per_hour or any(v is None for v in values):
            return None
        return sum(values) / len(values)

    observations = []
    for hour in sorted(by_hour):
        group = by_hour[hour]
        observations.append(LoadObservation(
            country=series.country,
            interval_start=hour,
            interval_end=hour + HOUR,
            day_ahead_forecast=column_mean([o.day_ahead_forecast for o in group], len(group)),
            actual_load=column_mean([o.actual_load for o in group], len(group)),
        ))
    return LoadSeries(country=series.country, frequency="hourly",
                      observations=observations, source=series.source)


def merge_load_sources(total: LoadSeries, vertical: LoadSeries,
                       cutoff: datetime = DEFAULT_SOURCE_CUTOFF) -> LoadSeries:
    """One hourly series: actuals from total at/after the cutoff, from
    vertical before it; the day-ahead forecast column always comes from total."""
    if total.country != vertical.country:
        raise InvalidInputError(
            f"cannot merge different countries {total.country!r} and {vertical.country!r}")
    if total.frequency != "hourly" or vertical.frequency != "hourly":
        raise InvalidInputError("merge requires both series aggregated to hourly")
    cutoff = cutoff.astimezone(timezone.utc)

    total_by_time = {o.interval_start: o for o in total.observations}
    vertical_by_time = {o.interval_start: o for o in vertical.observations}
    hours = sorted(set(total_by_time) | set(vertical_by_time))

    observations = []
    for hour in hours:
        in_total = total_by_time.get(hour)
        in_vertical = vertical_by_time.get(hour)
        if hour >= cutoff:
            actual = in_total.actual_load if in_total else None
        else:
            actual = in_vertical.actual_load if in_vertical else None
        observations.append(LoadObservation(
            country=total.country,
            interval_start=hour,
            interval_end=hour + HOUR,
            day_ahead_forecast=in_total.day_ahead_forecast if in_total else None,
            actual_load=actual,
        ))
    return LoadSeries(country=total.country, frequency="hourly",
                      observations=observations, source=TOTAL_LOAD)
