"""Reader for the results CSV contract.

The contract, implemented here independently of any producer library so
the figures work against any implementation that emits it:

* zero or more ``#``-prefixed header lines; ``# nngplab <kind>`` names
  the result kind and ``# {...}`` carries a JSON metadata document;
* a CSV header row, either the results schema
  ``width,metric,value,std,sample_count,repetitions,seed`` or the
  raw-samples schema ``value``;
* one CSV data row per record.

Malformed content raises :class:`CsvFormatError` carrying the
1-indexed line number.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

RESULTS_HEADER = ("width", "metric", "value", "std", "sample_count", "repetitions", "seed")
SAMPLES_HEADER = ("value",)


class CsvFormatError(ValueError):
    """A results file that does not follow the CSV contract."""


@dataclass(frozen=True)
class ResultRow:
    width: int
    metric: str
    value: float
    std: float
    sample_count: int
    repetitions: int
    seed: int


@dataclass(frozen=True)
class ResultTable:
    """Parsed results file: kind tag, metadata document, typed rows."""

    kind: str
    metadata: dict
    rows: tuple[ResultRow, ...]

    def metrics(self) -> tuple[str, ...]:
        seen: list[str] = []
        for row in self.rows:
            if row.metric not in seen:
                seen.append(row.metric)
        return tuple(seen)

    def series(self, metric: str) -> tuple[ResultRow, ...]:
        return tuple(sorted(
            (row for row in self.rows if row.metric == metric),
            key=lambda row: row.width,
        ))


@dataclass(frozen=True)
class SampleSet:
    """Parsed raw-samples file."""

    kind: str
    metadata: dict
    values: np.ndarray


def _split_header(path: Path) -> tuple[str, dict, list[str], int]:
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise CsvFormatError(f"cannot read {path}: {exc}") from exc
    kind = "unknown"
    metadata: dict = {}
    for i, line in enumerate(lines):
        if not line.startswith("#"):
            return kind, metadata, lines[i:], i + 1
        text = line[1:].strip()
        if text.startswith("nngplab"):
            parts = text.split()
            if len(parts) >= 2:
                kind = parts[-1]
        elif text.startswith("{"):
            try:
                metadata = json.loads(text)
            except json.JSONDecodeError as exc:
                raise CsvFormatError(f"{path}: line {i + 1}: invalid metadata JSON: {exc}") from exc
    raise CsvFormatError(f"{path}: no CSV header row found")


def read_results(path) -> ResultTable:
    """Parse a results CSV (the width/metric/value schema)."""
    path = Path(path)
    kind, metadata, body, first_line = _split_header(path)
    reader = csv.reader(io.StringIO("\n".join(body) + "\n"))
    header = tuple(next(reader, ()))
    if header != RESULTS_HEADER:
        raise CsvFormatError(
            f"{path}: line {first_line}: header {list(header)} does not match "
            f"{list(RESULTS_HEADER)}"
        )
    rows: list[ResultRow] = []
    for offset, record in enumerate(reader):
        line_no = first_line + 1 + offset
        if not record:
            continue
        if len(record) != len(RESULTS_HEADER):
            raise CsvFormatError(
                f"{path}: line {line_no}: expected {len(RESULTS_HEADER)} fields, "
                f"got {len(record)}"
            )
        try:
            rows.append(ResultRow(
                width=int(record[0]),
                metric=record[1],
                value=float(record[2]),
                std=float(record[3]),
                sample_count=int(record[4]),
                repetitions=int(record[5]),
                seed=int(record[6]),
            ))
        except ValueError as exc:
            raise CsvFormatError(f"{path}: line {line_no}: {exc}") from exc
    return ResultTable(kind=kind, metadata=metadata, rows=tuple(rows))


def read_samples(path) -> SampleSet:
    """Parse a raw-samples CSV (single ``value`` column)."""
    path = Path(path)
    kind, metadata, body, first_line = _split_header(path)
    if tuple(body[:1]) != SAMPLES_HEADER:
        raise CsvFormatError(
            f"{path}: line {first_line}: header {body[:1]} does not match ['value']"
        )
    values = np.empty(len(body) - 1)
    for offset, text in enumerate(body[1:]):
        line_no = first_line + 1 + offset
        try:
            values[offset] = float(text)
        except ValueError as exc:
            raise CsvFormatError(f"{path}: line {line_no}: {exc}") from exc
    return SampleSet(kind=kind, metadata=metadata, values=values)
