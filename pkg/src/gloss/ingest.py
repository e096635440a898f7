"""Trip-record CSV ingestion into hour x day x week x zone count tensors.

Each record carries an arrival timestamp and a zone id; the cell indexed by
(hour of day, day index, week index, zone index) is incremented per record.
The calendar is epoch-relative: day index is days-since-epoch mod 7 and week
index is days-since-epoch div 7, so exactly ``weeks`` full 7-day blocks are
covered regardless of ISO week conventions.
"""

from __future__ import annotations

import csv
import datetime
from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple, Union

import numpy as np

from .tensors import full_support, unfold

HOURS = 24
DAYS = 7


@dataclass(frozen=True)
class TripRecord:
    """One parsed trip arrival."""

    timestamp: datetime.datetime
    zone_id: str


class ZoneIndex:
    """Stable bidirectional mapping between zone ids and mode-3 indices."""

    def __init__(self, ids: Sequence[str]):
        ids = [str(z).strip() for z in ids]
        if len(set(ids)) != len(ids):
            raise ValueError("zone ids must be unique")
        if not ids:
            raise ValueError("zone index must not be empty")
        self.ids: Tuple[str, ...] = tuple(ids)
        self._lookup = {z: i for i, z in enumerate(self.ids)}

    @classmethod
    def from_file(cls, path: str) -> "ZoneIndex":
        """One zone id per line; blank lines ignored."""
        with open(path, "r", encoding="utf-8") as f:
            ids = [line.strip() for line in f if line.strip()]
        return cls(ids)

    def index_of(self, zone_id: str) -> int:
        return self._lookup[str(zone_id).strip()]

    def __contains__(self, zone_id) -> bool:
        return str(zone_id).strip() in self._lookup

    def __len__(self) -> int:
        return len(self.ids)


@dataclass
class IngestReport:
    accepted: int = 0
    skipped_out_of_range: int = 0
    skipped_unknown_zone: int = 0
    bad_rows: int = 0
    bad_row_lines: list = None

    def __post_init__(self):
        if self.bad_row_lines is None:
            self.bad_row_lines = []


@dataclass
class IngestResult:
    tensor: np.ndarray
    omega: np.ndarray
    report: IngestReport


def ingest(
    source: Union[str, Iterable[str]],
    zones: ZoneIndex,
    epoch: datetime.date,
    weeks: int = 52,
    timestamp_col: str = "timestamp",
    zone_col: str = "zone_id",
    timestamp_format: str = "%Y-%m-%d %H:%M:%S",
    on_bad_row: str = "error",
) -> IngestResult:
    """Aggregate a trip CSV into a (24, 7, weeks, zones) count tensor.

    Records outside the epoch-to-``weeks`` window or with unlisted zones are
    counted and skipped.  Unparseable rows either raise (with the line
    number) or are skipped, per ``on_bad_row`` ("error" or "skip").
    """
    if on_bad_row not in ("error", "skip"):
        raise ValueError(f"on_bad_row must be 'error' or 'skip', got {on_bad_row!r}")
    if weeks < 1:
        raise ValueError("weeks must be >= 1")

    tensor = np.zeros((HOURS, DAYS, weeks, len(zones)))
    report = IngestReport()

    close_after = isinstance(source, str)
    f = open(source, "r", encoding="utf-8", newline="") if close_after else source
    try:
        reader = csv.DictReader(f)
        if reader.fieldnames is None:
            return IngestResult(tensor=tensor, omega=full_support(tensor.shape), report=report)
        for col in (timestamp_col, zone_col):
            if col not in reader.fieldnames:
                raise ValueError(f"CSV is missing required column {col!r}")
        for row in reader:
            line = reader.line_num
            try:
                raw_ts = row[timestamp_col]
                raw_zone = row[zone_col]
                if raw_ts is None or raw_zone is None:
                    raise ValueError("short row")
                record = TripRecord(
                    timestamp=datetime.datetime.strptime(raw_ts.strip(), timestamp_format),
                    zone_id=raw_zone.strip(),
                )
            except (ValueError, AttributeError) as exc:
                if on_bad_row == "error":
                    raise ValueError(f"line {line}: unparseable row ({exc})") from exc
                report.bad_rows += 1
                if len(report.bad_row_lines) < 20:
                    report.bad_row_lines.append(line)
                continue

            days_since = (record.timestamp.date() - epoch).days
            week, day = days_since // 7, days_since % 7
            if days_since < 0 or week >= weeks:
                report.skipped_out_of_range += 1
                continue
            if record.zone_id not in zones:
                report.skipped_unknown_zone += 1
                continue
            tensor[record.timestamp.hour, day, week, zones.index_of(record.zone_id)] += 1.0
            report.accepted += 1
    finally:
        if close_after:
            f.close()

    return IngestResult(tensor=tensor, omega=full_support(tensor.shape), report=report)


@dataclass
class DatasetStats:
    """Summary statistics of a count tensor."""

    mean_std_per_mode: tuple
    sparsity: float
    max_value: float
    mean_value: float

    def to_json_dict(self) -> dict:
        return {
            "mean_std_per_mode": list(self.mean_std_per_mode),
            "sparsity": self.sparsity,
            "max_value": self.max_value,
            "mean_value": self.mean_value,
        }


def dataset_stats(t: np.ndarray) -> DatasetStats:
    """Per-mode mean of unfolding-row standard deviations, sparsity, max, mean."""
    mean_std = tuple(float(np.mean(np.std(unfold(t, n), axis=1))) for n in range(t.ndim))
    return DatasetStats(
        mean_std_per_mode=mean_std,
        sparsity=float(np.mean(t == 0.0)),
        max_value=float(t.max()),
        mean_value=float(t.mean()),
    )
