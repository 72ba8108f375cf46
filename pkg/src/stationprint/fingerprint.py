"""Per-station cluster histograms ("fingerprints") and day-time partitions.

A station's fingerprint counts how many of its snippets landed in each
embedding cluster. Day-time variants (night 21:00-05:00, morning
05:00-09:00, day 09:00-21:00, wall-clock schedule time) are rescaled to the
whole-day mass of 576 so all partitions live on one distance scale.
"""

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from stationprint.errors import EmptyPartitionError, ShapeError

WHOLE_DAY = "whole_day"
NIGHT = "night"
MORNING = "morning"
DAY = "day"
PARTITIONS = (WHOLE_DAY, NIGHT, MORNING, DAY)
TIME_PARTITIONS = (NIGHT, MORNING, DAY)
TARGET_MASS = 576
MASS_CHECK_TOLERANCE = 1e-6  # slack when verifying normalization

# slots per partition over a complete 24 h schedule
PARTITION_SLOT_COUNTS = {NIGHT: 192, MORNING: 96, DAY: 288}


@dataclass(frozen=True)
class Fingerprint:
    station_id: str
    partition: str
    histogram: np.ndarray
    sample_count: int

    @property
    def n(self) -> int:
        return len(self.histogram)

    @property
    def mass(self) -> float:
        return float(self.histogram.sum())

    def to_json(self, model_version: str) -> dict:
        histogram = [
            int(v) if float(v).is_integer() else float(v) for v in self.histogram
        ]
        return {
            "station_id": self.station_id,
            "partition": self.partition,
            "n": self.n,
            "histogram": histogram,
            "sample_count": self.sample_count,
            "model_version": model_version,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Fingerprint":
        return cls(
            station_id=obj["station_id"],
            partition=obj["partition"],
            histogram=np.asarray(obj["histogram"], dtype=np.float64),
            sample_count=obj["sample_count"],
        )


def partition_of(timestamp) -> str:
    """Day-time partition of a schedule timestamp (wall-clock hours)."""
    hour = timestamp.hour
    if hour >= 21 or hour < 5:
        return NIGHT
    if hour < 9:
        return MORNING
    return DAY


def partition_assignments(timestamps) -> dict:
    """Split snippet indices into the three day-time partitions.

    Every timestamp lands in exactly one partition; together with whole_day
    (all indices) the partitions cover the input exactly.
    """
    out = {NIGHT: [], MORNING: [], DAY: []}
    for i, ts in enumerate(timestamps):
        out[partition_of(ts)].append(i)
    return out


def build_fingerprint(assignments, n: int, station_id: str, partition: str = WHOLE_DAY) -> Fingerprint:
    """Histogram of cluster assignments for one station and partition."""
    assignments = np.asarray(assignments, dtype=np.int64)
    if assignments.size == 0:
        raise EmptyPartitionError(f"{station_id}/{partition}: no assignments")
    if assignments.min() < 0 or assignments.max() >= n:
        raise ShapeError(f"assignment outside [0, {n})")
    histogram = np.bincount(assignments, minlength=n).astype(np.float64)
    return Fingerprint(
        station_id=station_id,
        partition=partition,
        histogram=histogram,
        sample_count=int(assignments.size),
    )


def normalize_fingerprint(fp: Fingerprint, target_mass: float = TARGET_MASS) -> Fingerprint:
    """Scale the histogram to target_mass so partitions of different length
    are comparable with whole-day fingerprints."""
    if fp.sample_count <= 0:
        raise EmptyPartitionError(f"{fp.station_id}/{fp.partition}: zero samples")
    return replace(fp, histogram=fp.histogram * (target_mass / fp.sample_count))


def write_fingerprint_store(fingerprints, path, model_version: str):
    """JSON-lines store: one object per (station, partition)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for fp in fingerprints:
            fh.write(json.dumps(fp.to_json(model_version), sort_keys=True) + "\n")


def read_fingerprint_records(path):
    """Yield (Fingerprint, model_version) pairs from a JSON-lines store."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            yield Fingerprint.from_json(obj), obj.get("model_version", "")
