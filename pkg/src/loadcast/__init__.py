"""loadcast: short-term electricity load forecasting.

Ingests hourly and sub-hourly load snapshots, audits their quality, trains
gradient-boosted regression tree models (point and decile forecasts) per
country and horizon, and serves 24-hour-ahead forecasts over a CLI and a
small HTTP API.
"""

from .config import DEFAULTS, EngineConfig, ModelParams, load_config
from .engine import (forecast_next_24, load_merged_series, make_calendar,
                     rebuild_models, repair_decile_crossing, run_scheduler)
from .errors import (ConfigurationError, InsufficientDataError, IntegrityError,
                     InvalidInputError, LoadcastError, NotFoundError, ParseError)
from .evaluation import (EvaluationResult, benchmark_compare, error_stats,
                         evaluate_records, histogram, horizon_table, mape, pinball)
from .features import (Calendar, FeatureRow, build_inference_row,
                       build_training_rows, calendar_features, load_holidays)
from .gbrt import BoostConfig, BoostedModel, SampleSet, fit, fit_tree, percentile
from .quality import QualityReport, audit, render_report
from .records import ForecastRecord, ModelRecord
from .series import (LoadObservation, LoadSeries, aggregate_to_hourly,
                     detect_frequency, merge_load_sources, parse_timestamp)
from .csvio import parse_load_csv, series_to_csv
from .service import Service
from .store import DocumentStore

__version__ = "0.1.0"

__all__ = [
    "BoostConfig", "BoostedModel", "Calendar", "ConfigurationError", "DEFAULTS",
    "DocumentStore", "EngineConfig", "EvaluationResult", "FeatureRow",
    "ForecastRecord", "InsufficientDataError", "IntegrityError",
    "InvalidInputError", "LoadObservation", "LoadSeries", "LoadcastError",
    "ModelParams", "ModelRecord", "NotFoundError", "ParseError", "QualityReport",
    "SampleSet", "Service", "aggregate_to_hourly", "audit", "benchmark_compare",
    "build_inference_row", "build_training_rows", "calendar_features",
    "detect_frequency", "error_stats", "evaluate_records", "fit", "fit_tree",
    "forecast_next_24", "histogram", "horizon_table", "load_config",
    "load_holidays", "load_merged_series", "make_calendar", "mape",
    "merge_load_sources", "parse_load_csv", "parse_timestamp", "percentile",
    "pinball", "rebuild_models", "render_report",
    "repair_decile_crossing", "run_scheduler", "series_to_csv", "__version__",
]
