"""File-backed document store.

Layout under the data directory:

    series/<country>.docs            one JSON document per line, tagged by source
    models/<country>/<horizon>/<kind>.docs
    forecasts/<country>.docs

Files are append-only JSON lines.  Every write rewrites to a temp file in the
same directory and renames it over the original, so a reader always sees a
complete file (rename is atomic on POSIX).  Later documents win: loads scan
for the newest matching entry.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
import threading
from datetime import datetime
from pathlib import Path

from .errors import IntegrityError, InvalidInputError, NotFoundError
from .records import ForecastRecord, ModelRecord
from .series import LoadSeries, SOURCES, TOTAL_LOAD

_COUNTRY_SAFE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_-]*$")


def _check_country(country: str) -> str:
    if not isinstance(country, str) or not _COUNTRY_SAFE.match(country):
        raise InvalidInputError(f"country code unusable as a store key: {country!r}")
    return country


class DocumentStore:
    """Single-writer, many-reader document files under one root directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        # serializes writers within this process; readers need no lock
        self._write_lock = threading.Lock()

    # -- plumbing ---------------------------------------------------------

    def _append(self, path: Path, docs: dict | list[dict]) -> None:
        with self._write_lock:
            self._append_locked(path, docs)

    def _append_locked(self, path: Path, docs: dict | list[dict]) -> None:
        if isinstance(docs, dict):
            docs = [docs]
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = "".join(json.dumps(d, separators=(",", ":"), allow_nan=False) + "\n"
                        for d in docs)
        existing = b""
        if path.exists():
            existing = path.read_bytes()
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".docs")
        try:
            with os.fdopen(fd, "wb") as handle:
                handle.write(existing)
                handle.write(lines.encode("utf-8"))
                handle.flush()
                os.fsync(handle.fileno())
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def _read_docs(self, path: Path) -> list[dict]:
        if not path.exists():
            return []
        docs = []
        with path.open("r", encoding="utf-8") as handle:
            for number, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    docs.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise IntegrityError(
                        f"corrupt document in {path} line {number}: {exc}") from None
        return docs

    # -- series -----------------------------------------------------------

    def _series_path(self, country: str) -> Path:
        return self.root / "series" / f"{_check_country(country)}.docs"

    def store_series(self, series: LoadSeries) -> None:
        self._append(self._series_path(series.country), series.to_doc())

    def load_series(self, country: str, source: str = TOTAL_LOAD) -> LoadSeries:
        if source not in SOURCES:
            raise InvalidInputError(f"unknown source {source!r}")
        path = self._series_path(country)
        latest = None
        for doc in self._read_docs(path):
            if doc.get("source", TOTAL_LOAD) == source:
                latest = doc
        if latest is None:
            raise NotFoundError(f"no stored {source} series for {country!r}")
        try:
            return LoadSeries.from_doc(latest)
        except (KeyError, InvalidInputError) as exc:
            raise IntegrityError(f"corrupt series document in {path}: {exc}") from None

    def has_series(self, country: str, source: str = TOTAL_LOAD) -> bool:
        try:
            self.load_series(country, source)
            return True
        except NotFoundError:
            return False

    def list_countries(self) -> list[str]:
        directory = self.root / "series"
        if not directory.is_dir():
            return []
        return sorted(p.stem for p in directory.glob("*.docs"))

    # -- models -----------------------------------------------------------

    def _model_path(self, country: str, horizon: int, kind: str) -> Path:
        return (self.root / "models" / _check_country(country)
                / str(int(horizon)) / f"{kind}.docs")

    def store_model(self, record: ModelRecord) -> None:
        path = self._model_path(record.country, record.horizon, record.kind)
        self._append(path, record.to_doc())

    def find_latest_models(self, country: str, horizon: int, kind: str,
                           loss_tags: tuple[str, ...]) -> dict[str, ModelRecord]:
        """Newest record per requested loss tag, in one pass over the file.

        Tags with no stored model are simply absent from the result.
        """
        path = self._model_path(country, horizon, kind)
        wanted = set(loss_tags)
        best: dict[str, ModelRecord] = {}
        for doc in self._read_docs(path):
            if doc.get("loss") not in wanted:
                continue
            try:
                record = ModelRecord.from_doc(doc)
            except (KeyError, InvalidInputError) as exc:
                raise IntegrityError(f"corrupt model document in {path}: {exc}") from None
            current = best.get(record.loss_tag)
            if current is None or record.trained_at > current.trained_at:
                best[record.loss_tag] = record
        return best

    def find_latest_model(self, country: str, horizon: int, kind: str,
                          loss_tag: str = "point") -> ModelRecord:
        found = self.find_latest_models(country, horizon, kind, (loss_tag,))
        if loss_tag not in found:
            raise NotFoundError(
                f"no {kind} {loss_tag} model for {country!r} at horizon {horizon}")
        return found[loss_tag]

    def latest_trained_at(self, country: str) -> datetime | None:
        directory = self.root / "models" / country
        if not directory.is_dir():
            return None
        newest: datetime | None = None
        for path in directory.rglob("*.docs"):
            for doc in self._read_docs(path):
                try:
                    record = ModelRecord.from_doc(doc)
                except (KeyError, InvalidInputError) as exc:
                    raise IntegrityError(f"corrupt model document in {path}: {exc}") from None
                if newest is None or record.trained_at > newest:
                    newest = record.trained_at
        return newest

    # -- forecasts ----------------------------------------------------------

    def _forecast_path(self, country: str) -> Path:
        return self.root / "forecasts" / f"{_check_country(country)}.docs"

    def store_forecasts(self, records: list[ForecastRecord]) -> None:
        by_country: dict[str, list[dict]] = {}
        for record in records:
            by_country.setdefault(record.country, []).append(record.to_doc())
        for country, docs in by_country.items():
            self._append(self._forecast_path(country), docs)

    def load_forecasts(self, country: str) -> list[ForecastRecord]:
        path = self._forecast_path(country)
        records = []
        for doc in self._read_docs(path):
            try:
                records.append(ForecastRecord.from_doc(doc))
            except (KeyError, InvalidInputError) as exc:
                raise IntegrityError(f"corrupt forecast document in {path}: {exc}") from None
        return records

    # -- maintenance --------------------------------------------------------

    def checksum(self) -> str:
        """Stable digest over every stored byte; used to prove reads are pure."""
        import hashlib

        digest = hashlib.sha256()
        for path in sorted(self.root.rglob("*.docs")):
            digest.update(str(path.relative_to(self.root)).encode())
            digest.update(path.read_bytes())
        return digest.hexdigest()
