"""Persisted record types: trained models and issued forecasts."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta

from .errors import InvalidInputError
from .gbrt import BoostedModel, model_from_doc, model_to_doc
from .series import format_timestamp, parse_timestamp, truncate_to_hour

BASIC = "basic"
ADVANCED = "advanced"
KINDS = (BASIC, ADVANCED)

POINT = "point"
DECILE_LEVELS = tuple(range(10, 100, 10))


def decile_tag(level: int) -> str:
    if level not in DECILE_LEVELS:
        raise InvalidInputError(f"decile level must be one of {DECILE_LEVELS}, got {level!r}")
    return f"decile({level})"


LOSS_TAGS = (POINT,) + tuple(decile_tag(a) for a in DECILE_LEVELS)


def training_loss(loss_tag: str) -> str:
    """Objective behind a record's loss tag: point models minimize squared
    error, decile(a) models the level-a quantile loss."""
    if loss_tag == POINT:
        return "squared"
    for level in DECILE_LEVELS:
        if loss_tag == decile_tag(level):
            return f"quantile({level})"
    raise InvalidInputError(f"unknown loss tag {loss_tag!r}")


@dataclass
class ModelRecord:
    """A trained model plus the metadata used to find it again."""

    country: str
    horizon: int
    kind: str
    loss_tag: str
    trained_at: datetime
    feature_names: tuple[str, ...]
    model: BoostedModel

    def __post_init__(self):
        if not 1 <= self.horizon <= 24:
            raise InvalidInputError(f"horizon must be in 1..24, got {self.horizon!r}")
        if self.kind not in KINDS:
            raise InvalidInputError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.loss_tag not in LOSS_TAGS:
            raise InvalidInputError(f"unknown loss tag {self.loss_tag!r}")
        self.feature_names = tuple(self.feature_names)
        if len(self.feature_names) != self.model.n_features:
            raise InvalidInputError(
                f"schema arity {len(self.feature_names)} does not match model arity "
                f"{self.model.n_features}")
        if self.kind == BASIC and any(name.startswith("lag_") for name in self.feature_names):
            raise InvalidInputError("basic models must not consume lag features")

    def to_doc(self) -> dict:
        return {
            "country": self.country,
            "horizon": self.horizon,
            "kind": self.kind,
            "loss": self.loss_tag,
            "trained_at": format_timestamp(self.trained_at),
            "features": list(self.feature_names),
            "model": model_to_doc(self.model),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ModelRecord":
        return cls(
            country=doc["country"],
            horizon=int(doc["horizon"]),
            kind=doc["kind"],
            loss_tag=doc["loss"],
            trained_at=parse_timestamp(doc["trained_at"]),
            feature_names=tuple(doc["features"]),
            model=model_from_doc(doc["model"]),
        )


@dataclass
class ForecastRecord:
    """One issued forecast for one target hour."""

    country: str
    issued_at: datetime
    target_time: datetime
    horizon: int
    point: float
    kind: str
    deciles: dict[int, float] | None = None

    def __post_init__(self):
        if not 1 <= self.horizon <= 24:
            raise InvalidInputError(f"horizon must be in 1..24, got {self.horizon!r}")
        if self.kind not in KINDS:
            raise InvalidInputError(f"kind must be one of {KINDS}, got {self.kind!r}")
        issued_hour = truncate_to_hour(self.issued_at)
        if self.target_time != issued_hour + timedelta(hours=self.horizon):
            raise InvalidInputError(
                f"target_time {self.target_time} is not horizon {self.horizon}h after "
                f"the issuance hour {issued_hour}")
        if self.deciles is not None:
            if tuple(sorted(self.deciles)) != DECILE_LEVELS:
                raise InvalidInputError("deciles must carry exactly the levels 10..90")
            ordered = [self.deciles[a] for a in DECILE_LEVELS]
            if any(b < a for a, b in zip(ordered, ordered[1:])):
                raise InvalidInputError("decile values must be non-decreasing")

    def to_doc(self) -> dict:
        doc = {
            "country": self.country,
            "issued_at": format_timestamp(self.issued_at),
            "target_time": format_timestamp(self.target_time),
            "horizon": self.horizon,
            "point": self.point,
            "kind": self.kind,
        }
        if self.deciles is not None:
            doc["deciles"] = {str(a): self.deciles[a] for a in DECILE_LEVELS}
        return doc

    @classmethod
    def from_doc(cls, doc: dict) -> "ForecastRecord":
        deciles = doc.get("deciles")
        if deciles is not None:
            deciles = {int(a): float(v) for a, v in deciles.items()}
        return cls(
            country=doc["country"],
            issued_at=parse_timestamp(doc["issued_at"]),
            target_time=parse_timestamp(doc["target_time"]),
            horizon=int(doc["horizon"]),
            point=float(doc["point"]),
            kind=doc["kind"],
            deciles=deciles,
        )
