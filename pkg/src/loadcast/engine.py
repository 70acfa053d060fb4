"""Forecasting engine: model rebuilds, 24-hour forecast batches, and the
hourly scheduler loop.

Per country the engine keeps one point model per horizon and kind (basic and
advanced) plus, when enabled, nine advanced decile models per horizon.  The
scheduler serializes the rebuild phase and the forecast phase per country, and
each forecast batch snapshots every model it needs before predicting so one
batch never mixes model generations.
"""

from __future__ import annotations

import logging
import time
from datetime import datetime, timezone

from . import gbrt
from .config import EngineConfig
from .errors import ConfigurationError, InsufficientDataError, LoadcastError, NotFoundError
from .features import (ADVANCED, BASIC, ADVANCED_FEATURES, BASIC_FEATURES, Calendar,
                       build_inference_row, build_training_rows, load_holidays,
                       rows_to_matrix)
from .records import (DECILE_LEVELS, POINT, ForecastRecord, ModelRecord, decile_tag,
                      training_loss)
from .series import HOUR, TOTAL_LOAD, VERTICAL_LOAD, LoadSeries, aggregate_to_hourly, merge_load_sources, truncate_to_hour
from .store import DocumentStore

log = logging.getLogger("loadcast.engine")

ALL_HORIZONS = tuple(range(1, 25))


def make_calendar(config: EngineConfig, country: str) -> Calendar:
    """Calendar for a country: configured zone override wins, holidays come
    from <calendar_dir>/<country>.holidays when that file exists."""
    holiday_path = config.calendar_dir / f"{country}.holidays"
    holidays = load_holidays(holiday_path) if holiday_path.is_file() else frozenset()
    return Calendar.for_country(country, holidays=holidays,
                                zone_override=config.timezones.get(country))


def load_merged_series(store: DocumentStore, country: str,
                       cutoff: datetime) -> LoadSeries:
    """Hourly modelling series for a country: total load aggregated to hourly,
    with actuals before the cutoff taken from vertical load when stored."""
    total = aggregate_to_hourly(store.load_series(country, TOTAL_LOAD))
    try:
        vertical = aggregate_to_hourly(store.load_series(country, VERTICAL_LOAD))
    except NotFoundError:
        return total
    return merge_load_sources(total, vertical, cutoff)


def _fit_record(country: str, horizon: int, kind: str, loss_tag: str,
                matrix, targets, feature_names, params, trained_at) -> ModelRecord:
    samples = gbrt.SampleSet(matrix, targets, feature_names=list(feature_names))
    boost = gbrt.BoostConfig(n_trees=params.n_trees, learning_rate=params.learning_rate,
                             max_depth=params.max_depth,
                             min_samples_leaf=params.min_samples_leaf,
                             loss=training_loss(loss_tag))
    model = gbrt.fit(samples, boost)
    return ModelRecord(country=country, horizon=horizon, kind=kind, loss_tag=loss_tag,
                       trained_at=trained_at, feature_names=tuple(feature_names),
                       model=model)


def rebuild_models(store: DocumentStore, country: str, calendar: Calendar,
                   config: EngineConfig, now: datetime | None = None,
                   horizons: tuple[int, ...] = ALL_HORIZONS,
                   ) -> tuple[list[ModelRecord], list[str]]:
    """Retrain and persist every model for a country.

    Basic models are mandatory: too little data for them raises.  A horizon
    whose advanced rows all drop out (lags unavailable) keeps its old advanced
    model and is reported in the returned warnings instead of failing the
    rebuild.  Decile models are trained only when the config enables them.
    """
    trained_at = now if now is not None else datetime.now(timezone.utc)
    series = load_merged_series(store, country, config.source_cutoff)
    records: list[ModelRecord] = []
    warnings: list[str] = []

    for horizon in horizons:
        basic_rows, basic_targets = build_training_rows(series, calendar, horizon, BASIC)
        basic_matrix = rows_to_matrix(basic_rows, BASIC)
        records.append(_fit_record(country, horizon, BASIC, POINT, basic_matrix,
                                   basic_targets, BASIC_FEATURES, config.basic, trained_at))

        try:
            adv_rows, adv_targets = build_training_rows(series, calendar, horizon, ADVANCED)
        except InsufficientDataError as exc:
            warnings.append(f"horizon {horizon}: no advanced model ({exc.message})")
            continue
        adv_matrix = rows_to_matrix(adv_rows, ADVANCED)
        records.append(_fit_record(country, horizon, ADVANCED, POINT, adv_matrix,
                                   adv_targets, ADVANCED_FEATURES, config.advanced,
                                   trained_at))
        if config.deciles:
            for level in DECILE_LEVELS:
                records.append(_fit_record(country, horizon, ADVANCED, decile_tag(level),
                                           adv_matrix, adv_targets, ADVANCED_FEATURES,
                                           config.decile, trained_at))

    for record in records:
        store.store_model(record)
    return records, warnings


def repair_decile_crossing(values) -> list[float]:
    """Independently fitted quantile models can cross; restore monotonicity
    by sorting the nine values."""
    values = [float(v) for v in values]
    if len(values) != len(DECILE_LEVELS):
        raise LoadcastError(f"expected {len(DECILE_LEVELS)} decile values, got {len(values)}")
    return sorted(values)


def forecast_next_24(store: DocumentStore, country: str, calendar: Calendar,
                     config: EngineConfig, now: datetime,
                     ) -> tuple[list[ForecastRecord], dict[int, str]]:
    """Forecast records for the 24 hours after `now`, plus per-horizon errors.

    Each horizon serves the advanced model when the feature row has both lags
    and an advanced model exists, otherwise the basic model.  Deciles are
    attached only when the row is advanced and all nine decile models exist.
    All models are read before any prediction, so a rebuild landing midway
    cannot mix generations inside the batch.
    """
    series = load_merged_series(store, country, config.source_cutoff)
    issued_hour = truncate_to_hour(now)
    decile_tags = tuple(decile_tag(a) for a in DECILE_LEVELS)

    rows = {}
    models = {}
    for horizon in ALL_HORIZONS:
        rows[horizon] = build_inference_row(series, calendar,
                                            issued_hour + horizon * HOUR, horizon)
        advanced = store.find_latest_models(country, horizon, ADVANCED,
                                            (POINT,) + decile_tags)
        basic = store.find_latest_models(country, horizon, BASIC, (POINT,))
        models[horizon] = (basic.get(POINT), advanced)

    records: list[ForecastRecord] = []
    errors: dict[int, str] = {}
    for horizon in ALL_HORIZONS:
        row = rows[horizon]
        basic_point, advanced = models[horizon]
        kind = ADVANCED if row.kind == ADVANCED and POINT in advanced else BASIC
        if kind == BASIC and basic_point is None:
            errors[horizon] = f"no usable model for horizon {horizon}"
            continue
        record = advanced[POINT] if kind == ADVANCED else basic_point
        point = record.model.predict(row.vector(kind))

        deciles = None
        if kind == ADVANCED and all(tag in advanced for tag in decile_tags):
            raw = [advanced[decile_tag(a)].model.predict(row.vector(ADVANCED))
                   for a in DECILE_LEVELS]
            deciles = dict(zip(DECILE_LEVELS, repair_decile_crossing(raw)))

        records.append(ForecastRecord(country=country, issued_at=now,
                                      target_time=row.target_time, horizon=horizon,
                                      point=point, kind=kind, deciles=deciles))
    return records, errors


def run_scheduler(store: DocumentStore, config: EngineConfig,
                  clock=None, sleep=None, max_ticks: int | None = None) -> int:
    """Hourly loop: wake at each top of hour, rebuild any country whose local
    wall clock matches the configured rebuild time (once per local day), then
    issue and persist a 24-hour forecast batch for every country.

    `clock` and `sleep` are injectable for simulated time; `max_ticks` bounds
    the loop (None runs forever).  Returns the number of ticks processed.
    """
    clock = clock if clock is not None else (lambda: datetime.now(timezone.utc))
    sleep = sleep if sleep is not None else time.sleep
    rebuild_hh, rebuild_mm = config.rebuild_hour_minute
    rebuilt_days: set[tuple[str, object]] = set()
    ticks = 0

    while max_ticks is None or ticks < max_ticks:
        next_tick = truncate_to_hour(clock()) + HOUR
        while True:
            current = clock()
            if current >= next_tick:
                break
            sleep((next_tick - current).total_seconds())
        now = clock()

        countries = config.countries if config.countries is not None else store.list_countries()
        for country in countries:
            try:
                calendar = make_calendar(config, country)
            except ConfigurationError as exc:
                log.warning("%s: skipped, %s", country, exc.message)
                continue
            local = now.astimezone(calendar.timezone)
            if ((local.hour, local.minute) == (rebuild_hh, rebuild_mm)
                    and (country, local.date()) not in rebuilt_days):
                rebuilt_days.add((country, local.date()))
                started = time.monotonic()
                try:
                    records, warnings = rebuild_models(store, country, calendar, config, now=now)
                except LoadcastError as exc:
                    log.warning("%s: rebuild failed, %s", country, exc.message)
                else:
                    log.info("%s: rebuilt %d models in %.1fs", country, len(records),
                             time.monotonic() - started)
                    for warning in warnings:
                        log.warning("%s: %s", country, warning)
            try:
                records, horizon_errors = forecast_next_24(store, country, calendar,
                                                           config, now)
                store.store_forecasts(records)
            except LoadcastError as exc:
                log.warning("%s: forecast batch failed, %s", country, exc.message)
                continue
            for horizon, message in sorted(horizon_errors.items()):
                log.warning("%s: horizon %d skipped, %s", country, horizon, message)
            log.info("%s: stored %d forecasts issued at %s", country, len(records),
                     now.isoformat())
        ticks += 1
    return ticks
