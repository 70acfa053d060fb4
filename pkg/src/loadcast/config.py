"""Runtime configuration: model hyperparameters per family plus service
settings, loadable from a JSON file.

Every knob has a default so an empty config file (or none at all) yields a
working setup; unknown keys are rejected to catch typos early.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

from .errors import ConfigurationError
from .series import DEFAULT_SOURCE_CUTOFF, parse_timestamp


@dataclass(frozen=True)
class ModelParams:
    n_trees: int
    learning_rate: float
    max_depth: int
    min_samples_leaf: int

    def validate(self, label: str) -> None:
        if not (isinstance(self.n_trees, int) and self.n_trees >= 0):
            raise ConfigurationError(f"{label}.n_trees must be a non-negative integer")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigurationError(f"{label}.learning_rate must be in (0, 1]")
        if not (isinstance(self.max_depth, int) and self.max_depth >= 1):
            raise ConfigurationError(f"{label}.max_depth must be a positive integer")
        if not (isinstance(self.min_samples_leaf, int) and self.min_samples_leaf >= 1):
            raise ConfigurationError(f"{label}.min_samples_leaf must be a positive integer")

    def to_doc(self) -> dict:
        return {"n_trees": self.n_trees, "learning_rate": self.learning_rate,
                "max_depth": self.max_depth, "min_samples_leaf": self.min_samples_leaf}

    @classmethod
    def from_doc(cls, doc: dict, label: str) -> "ModelParams":
        base = dict(DEFAULTS[label].to_doc())
        for key, value in doc.items():
            if key not in base:
                raise ConfigurationError(f"unknown key {label}.{key}")
            base[key] = value
        params = cls(**base)
        params.validate(label)
        return params


DEFAULTS = {
    "basic": ModelParams(n_trees=50, learning_rate=0.1, max_depth=5, min_samples_leaf=5),
    "advanced": ModelParams(n_trees=100, learning_rate=0.1, max_depth=7, min_samples_leaf=5),
    "decile": ModelParams(n_trees=60, learning_rate=0.1, max_depth=5, min_samples_leaf=30),
}


@dataclass(frozen=True)
class EngineConfig:
    data_dir: Path = Path("loadcast-data")
    countries: tuple[str, ...] | None = None  # None means every stored country
    rebuild_time: str = "00:00"  # local wall clock, HH:MM
    deciles: bool = False
    basic: ModelParams = DEFAULTS["basic"]
    advanced: ModelParams = DEFAULTS["advanced"]
    decile: ModelParams = DEFAULTS["decile"]
    source_cutoff: datetime = DEFAULT_SOURCE_CUTOFF
    timezones: dict = field(default_factory=dict)  # country code -> IANA zone
    holiday_dir: Path | None = None  # default: <data_dir>/calendars
    listen_host: str = "127.0.0.1"
    listen_port: int = 8642

    def __post_init__(self):
        object.__setattr__(self, "data_dir", Path(self.data_dir))
        if self.holiday_dir is not None:
            object.__setattr__(self, "holiday_dir", Path(self.holiday_dir))
        hh_mm = self.rebuild_time.split(":")
        if (len(hh_mm) != 2 or not all(p.isdigit() and len(p) == 2 for p in hh_mm)
                or not (0 <= int(hh_mm[0]) <= 23 and 0 <= int(hh_mm[1]) <= 59)):
            raise ConfigurationError(
                f"rebuild_time must be HH:MM, got {self.rebuild_time!r}")
        # port 0 asks the OS for an ephemeral port
        if not (isinstance(self.listen_port, int) and 0 <= self.listen_port < 65536):
            raise ConfigurationError(f"listen_port out of range: {self.listen_port!r}")
        self.basic.validate("basic")
        self.advanced.validate("advanced")
        self.decile.validate("decile")

    @property
    def rebuild_hour_minute(self) -> tuple[int, int]:
        hh, mm = self.rebuild_time.split(":")
        return int(hh), int(mm)

    @property
    def calendar_dir(self) -> Path:
        return self.holiday_dir if self.holiday_dir is not None else self.data_dir / "calendars"

    def params_for(self, label: str) -> ModelParams:
        return {"basic": self.basic, "advanced": self.advanced, "decile": self.decile}[label]


_SIMPLE_KEYS = {"data_dir", "countries", "rebuild_time", "deciles", "source_cutoff",
                "timezones", "holiday_dir", "listen_host", "listen_port"}
_PARAM_KEYS = {"basic", "advanced", "decile"}


def config_from_doc(doc: dict) -> EngineConfig:
    if not isinstance(doc, dict):
        raise ConfigurationError("config root must be a JSON object")
    unknown = set(doc) - _SIMPLE_KEYS - _PARAM_KEYS
    if unknown:
        raise ConfigurationError(f"unknown config keys: {', '.join(sorted(unknown))}")

    kwargs: dict = {}
    if "data_dir" in doc:
        kwargs["data_dir"] = Path(doc["data_dir"])
    if "countries" in doc and doc["countries"] is not None:
        if not isinstance(doc["countries"], list) or not all(isinstance(c, str) for c in doc["countries"]):
            raise ConfigurationError("countries must be a list of country codes")
        kwargs["countries"] = tuple(doc["countries"])
    if "rebuild_time" in doc:
        kwargs["rebuild_time"] = str(doc["rebuild_time"])
    if "deciles" in doc:
        if not isinstance(doc["deciles"], bool):
            raise ConfigurationError("deciles must be true or false")
        kwargs["deciles"] = doc["deciles"]
    if "source_cutoff" in doc:
        try:
            kwargs["source_cutoff"] = parse_timestamp(doc["source_cutoff"])
        except Exception:
            raise ConfigurationError(
                f"source_cutoff must be an ISO timestamp with zone, got {doc['source_cutoff']!r}") from None
    if "timezones" in doc:
        tz = doc["timezones"]
        if not isinstance(tz, dict) or not all(isinstance(v, str) for v in tz.values()):
            raise ConfigurationError("timezones must map country codes to zone names")
        kwargs["timezones"] = dict(tz)
    if "holiday_dir" in doc and doc["holiday_dir"] is not None:
        kwargs["holiday_dir"] = Path(doc["holiday_dir"])
    if "listen_host" in doc:
        kwargs["listen_host"] = str(doc["listen_host"])
    if "listen_port" in doc:
        if not isinstance(doc["listen_port"], int):
            raise ConfigurationError("listen_port must be an integer")
        kwargs["listen_port"] = doc["listen_port"]
    for label in _PARAM_KEYS:
        if label in doc:
            if not isinstance(doc[label], dict):
                raise ConfigurationError(f"{label} must be an object of hyperparameters")
            kwargs[label] = ModelParams.from_doc(doc[label], label)
    return EngineConfig(**kwargs)


def load_config(path: str | Path | None) -> EngineConfig:
    """Read a JSON config file; None or a missing optional path yields defaults."""
    if path is None:
        return EngineConfig()
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path} is not valid JSON: {exc}") from None
    return config_from_doc(doc)


def with_data_dir(config: EngineConfig, data_dir: str | Path | None) -> EngineConfig:
    """CLI override: a --data-dir flag beats the config file."""
    if data_dir is None:
        return config
    return replace(config, data_dir=Path(data_dir))
