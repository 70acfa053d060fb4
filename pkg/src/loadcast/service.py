"""Service layer: every operation the HTTP API and the CLI expose, returning
plain documents so both frontends serve byte-identical payloads.

All store access goes through DocumentStore (single writer, many readers);
read operations never write.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone

from . import engine, evaluation
from .config import EngineConfig
from .countries import country_name
from .csvio import parse_load_csv
from .errors import InsufficientDataError, InvalidInputError, LoadcastError, NotFoundError
from .features import ADVANCED, BASIC
from .quality import QualityReport, audit
from .records import POINT, ForecastRecord
from .series import (HOUR, SOURCES, TOTAL_LOAD, LoadSeries,
                     format_timestamp, parse_timestamp, truncate_to_hour)
from .store import DocumentStore

HTTP_STATUS = {
    "not_found": 404,
    "invalid_input": 400,
    "insufficient_data": 422,
    "internal": 500,
}


def error_payload(exc: LoadcastError) -> dict:
    body = {"code": exc.code, "message": exc.message}
    if exc.detail:
        body["detail"] = exc.detail
    return {"error": body}


def _ceil_to_hour(stamp: datetime) -> datetime:
    floor = truncate_to_hour(stamp)
    return floor if floor == stamp else floor + HOUR


@dataclass
class Service:
    store: DocumentStore
    config: EngineConfig

    # -- ingestion ----------------------------------------------------------

    def ingest_csv(self, country: str, data: bytes | str,
                   source: str = TOTAL_LOAD) -> dict:
        """Parse a load CSV and merge it into the stored series for
        (country, source); rows with matching interval starts are replaced by
        the incoming values, so re-ingesting the same file is a no-op."""
        parsed = parse_load_csv(data, country, source)
        try:
            existing = self.store.load_series(country, source)
        except NotFoundError:
            existing = None

        if existing is None:
            merged = parsed
        else:
            if existing.frequency != parsed.frequency:
                raise InvalidInputError(
                    f"cannot merge {parsed.frequency} data into the existing "
                    f"{existing.frequency} series for {country!r}")
            by_start = {o.interval_start: o for o in existing.observations}
            by_start.update({o.interval_start: o for o in parsed.observations})
            merged = LoadSeries(country=country, frequency=parsed.frequency,
                                observations=[by_start[k] for k in sorted(by_start)],
                                source=source)
        self.store.store_series(merged)

        start, end = parsed.span()
        return {
            "country": country,
            "source": source,
            "rows": len(parsed),
            "frequency": parsed.frequency,
            "period": {"start": format_timestamp(start), "end": format_timestamp(end)},
            "stored_rows": len(merged),
        }

    # -- catalogue ----------------------------------------------------------

    def _any_series(self, country: str) -> LoadSeries:
        for source in SOURCES:
            try:
                return self.store.load_series(country, source)
            except NotFoundError:
                continue
        raise NotFoundError(f"unknown country {country!r}")

    def countries_summary(self) -> list[dict]:
        entries = []
        for country in self.store.list_countries():
            series = self._any_series(country)
            start, end = series.span()
            trained_at = self.store.latest_trained_at(country)
            entries.append({
                "country": country,
                "name": country_name(country),
                "frequency": series.frequency,
                "span": {"start": format_timestamp(start), "end": format_timestamp(end)},
                "sources": [s for s in SOURCES if self.store.has_series(country, s)],
                "latest_model_trained_at":
                    format_timestamp(trained_at) if trained_at else None,
            })
        return entries

    # -- forecasting --------------------------------------------------------

    def forecast_window(self, country: str, from_: str | datetime | None = None,
                        hours: int | str = 24) -> list[dict]:
        """Latest issued forecast per target hour over a window of 1..24 hours
        starting at `from_` (default: the newest issuance's first target)."""
        try:
            hours = int(hours)
        except (TypeError, ValueError):
            raise InvalidInputError(f"hours must be an integer, got {hours!r}") from None
        if not 1 <= hours <= 24:
            raise InvalidInputError(f"hours must be in 1..24, got {hours}")
        self._any_series(country)  # unknown country check runs first

        records = self.store.load_forecasts(country)
        if not records:
            raise InsufficientDataError(f"no forecasts issued yet for {country!r}")

        if from_ is None:
            newest = max(record.issued_at for record in records)
            start = truncate_to_hour(newest) + HOUR
        else:
            if isinstance(from_, str):
                from_ = parse_timestamp(from_)
            start = _ceil_to_hour(from_.astimezone(timezone.utc))
        end = start + hours * HOUR

        best: dict[datetime, ForecastRecord] = {}
        for record in records:
            if not start <= record.target_time < end:
                continue
            current = best.get(record.target_time)
            if (current is None
                    or (record.issued_at, -record.horizon) > (current.issued_at, -current.horizon)):
                best[record.target_time] = record
        if not best:
            raise InsufficientDataError(
                f"no forecasts cover [{format_timestamp(start)}, {format_timestamp(end)})")
        return [best[t].to_doc() for t in sorted(best)]

    def issue_forecast(self, country: str, now: datetime | None = None) -> dict:
        """Run a 24-horizon forecast batch right now and persist it."""
        now = now if now is not None else datetime.now(timezone.utc)
        calendar = engine.make_calendar(self.config, country)
        records, horizon_errors = engine.forecast_next_24(self.store, country, calendar,
                                                          self.config, now)
        if not records:
            raise InsufficientDataError(
                f"no horizon produced a forecast for {country!r}",
                detail={str(h): m for h, m in sorted(horizon_errors.items())})
        self.store.store_forecasts(records)
        return {
            "country": country,
            "issued_at": format_timestamp(now),
            "records": [record.to_doc() for record in records],
            "horizon_errors": {str(h): m for h, m in sorted(horizon_errors.items())},
        }

    # -- training -----------------------------------------------------------

    def rebuild(self, country: str, now: datetime | None = None,
                horizons: tuple[int, ...] = engine.ALL_HORIZONS) -> dict:
        calendar = engine.make_calendar(self.config, country)
        records, warnings = engine.rebuild_models(self.store, country, calendar,
                                                  self.config, now=now, horizons=horizons)
        counts = {
            BASIC: sum(1 for r in records if r.kind == BASIC),
            ADVANCED: sum(1 for r in records
                          if r.kind == ADVANCED and r.loss_tag == POINT),
        }
        if self.config.deciles:
            counts["decile"] = sum(1 for r in records
                                   if r.kind == ADVANCED and r.loss_tag != POINT)
        return {
            "country": country,
            "trained_at": format_timestamp(records[0].trained_at) if records else None,
            "counts": counts,
            "warnings": warnings,
        }

    # -- quality ------------------------------------------------------------

    def quality_reports(self, from_: str | datetime,
                        to: str | datetime) -> list[QualityReport]:
        if from_ is None or to is None:
            raise InvalidInputError("quality reports need both a from and a to timestamp")
        if isinstance(from_, str):
            from_ = parse_timestamp(from_)
        if isinstance(to, str):
            to = parse_timestamp(to)
        reports = []
        for country in self.store.list_countries():
            reports.append(audit(self._any_series(country), from_, to))
        return reports

    # -- evaluation ---------------------------------------------------------

    def evaluate(self, country: str, from_: str | datetime | None = None,
                 to: str | datetime | None = None, horizon: int | None = 24) -> dict:
        """Back-test stored forecasts for one country: overall result, the
        published day-ahead benchmark on the same window, a model-vs-benchmark
        comparison, the per-horizon table, and an error histogram."""
        if isinstance(from_, str):
            from_ = parse_timestamp(from_)
        if isinstance(to, str):
            to = parse_timestamp(to)
        if horizon is not None and not 1 <= int(horizon) <= 24:
            raise InvalidInputError(f"horizon must be in 1..24, got {horizon}")

        self._any_series(country)
        records = self.store.load_forecasts(country)
        if from_ is not None:
            records = [r for r in records if r.target_time >= from_]
        if to is not None:
            records = [r for r in records if r.target_time < to]
        if not records:
            raise InsufficientDataError(
                f"no stored forecasts for {country!r} in the requested window")

        series = engine.load_merged_series(self.store, country, self.config.source_cutoff)
        window_obs = [o for o in series.observations
                      if (from_ is None or o.interval_start >= from_)
                      and (to is None or o.interval_start < to)]
        window = LoadSeries(country=country, frequency=series.frequency,
                            observations=window_obs, source=series.source)
        actuals = window.actuals_by_time()

        result = evaluation.evaluate_records(country, records, actuals, horizon=horizon)
        benchmark = evaluation.benchmark_result(country, window)

        comparison = None
        if benchmark is not None:
            columns = tuple(sorted(set(result.monthly) | set(benchmark.monthly)))
            model_table = evaluation.MonthlyTable(
                columns=columns, rows={country: {c: result.monthly.get(c) for c in columns}})
            bench_table = evaluation.MonthlyTable(
                columns=columns, rows={country: {c: benchmark.monthly.get(c) for c in columns}})
            comparison = evaluation.benchmark_compare(model_table, bench_table)

        horizons = evaluation.horizon_table(records, {country: actuals})
        pairs = evaluation.join_records(records, actuals, horizon)
        errors = evaluation.abs_pct_errors([r.point for r, _ in pairs],
                                           [a for _, a in pairs])
        return {
            "result": result,
            "benchmark": benchmark,
            "comparison": comparison,
            "horizon_table": horizons,
            "histogram": evaluation.histogram(errors),
        }


def evaluation_doc(bundle: dict) -> dict:
    """Machine-readable document for an evaluate() bundle."""
    result = bundle["result"]
    benchmark = bundle["benchmark"]
    horizons = bundle["horizon_table"]
    return {
        "result": result.to_doc(),
        "benchmark": benchmark.to_doc() if benchmark else None,
        "comparison": bundle["comparison"].to_doc() if bundle["comparison"] else None,
        "horizon_mape": {str(h): horizons.rows[h].get(result.country)
                         for h in horizons.horizons},
        "histogram": bundle["histogram"],
    }
