"""Load CSV snapshot parsing and serialization.

Exact file contract: UTF-8, header ``interval_start,interval_end,
day_ahead_forecast,actual_load``, ISO-8601 timestamps with offset, value
cells a decimal number, the literal ``N/A``, or empty (empty means N/A).
Zeros are preserved as real values so the quality audit can count them.

Row numbers in errors are 1-based physical file lines, the header being
line 1.
"""

from __future__ import annotations

import csv
import io
import math

from .errors import InvalidInputError, ParseError
from .series import (
    LoadObservation,
    LoadSeries,
    MINUTES_FREQUENCY,
    TOTAL_LOAD,
    format_timestamp,
    parse_timestamp,
)

HEADER = ["interval_start", "interval_end", "day_ahead_forecast", "actual_load"]


def _parse_value(cell: str, label: str, row: int) -> float | None:
    text = cell.strip()
    if text == "" or text == "N/A":
        return None
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"row {row}: {label} is not a number or N/A: {cell!r}", row=row) from None
    if math.isnan(value) or math.isinf(value):
        raise ParseError(f"row {row}: {label} must be finite, got {cell!r}", row=row)
    if value < 0:
        raise ParseError(f"row {row}: {label} must be >= 0, got {cell!r}", row=row)
    return value


def parse_load_csv(data: bytes | str, country: str, source: str = TOTAL_LOAD) -> LoadSeries:
    """Parse one load snapshot into a LoadSeries (sorted, uniform intervals)."""
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"not valid UTF-8: {exc}") from None
    else:
        text = data
    reader = csv.reader(io.StringIO(text))

    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("row 1: missing header", row=1) from None
    if [h.strip() for h in header] != HEADER:
        raise ParseError(f"row 1: header must be {','.join(HEADER)!r}", row=1)

    rows: list[tuple[LoadObservation, int]] = []
    for record in reader:
        line = reader.line_num
        if not record or all(not cell.strip() for cell in record):
            continue
        if len(record) != 4:
            raise ParseError(f"row {line}: expected 4 columns, got {len(record)}", row=line)
        try:
            start = parse_timestamp(record[0])
            end = parse_timestamp(record[1])
        except InvalidInputError as exc:
            raise ParseError(f"row {line}: {exc.message}", row=line) from None
        forecast = _parse_value(record[2], "day_ahead_forecast", line)
        actual = _parse_value(record[3], "actual_load", line)
        try:
            obs = LoadObservation(country=country, interval_start=start, interval_end=end,
                                  day_ahead_forecast=forecast, actual_load=actual)
        except InvalidInputError as exc:
            raise ParseError(f"row {line}: {exc.message}", row=line) from None
        rows.append((obs, line))

    if not rows:
        raise ParseError("no data rows")

    first_minutes = rows[0][0].interval_minutes
    for obs, line in rows:
        if obs.interval_minutes != first_minutes:
            raise ParseError(
                f"row {line}: {obs.interval_minutes}-minute interval mixed into a "
                f"{first_minutes}-minute file", row=line)

    rows.sort(key=lambda pair: pair[0].interval_start)
    for (prev, _), (cur, line) in zip(rows, rows[1:]):
        if cur.interval_start == prev.interval_start:
            raise ParseError(f"row {line}: duplicate interval at {format_timestamp(cur.interval_start)}",
                             row=line)

    return LoadSeries(country=country, frequency=MINUTES_FREQUENCY[first_minutes],
                      observations=[obs for obs, _ in rows], source=source)


def series_to_csv(series: LoadSeries) -> str:
    """Serialize back to the snapshot format; parse -> serialize -> parse is
    a fixed point (timestamps come out in UTC)."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(HEADER)

    def cell(value: float | None) -> str:
        if value is None:
            return "N/A"
        return repr(float(value))  # shortest lossless decimal

    for obs in series.observations:
        writer.writerow([
            format_timestamp(obs.interval_start),
            format_timestamp(obs.interval_end),
            cell(obs.day_ahead_forecast),
            cell(obs.actual_load),
        ])
    return out.getvalue()
