"""Station similarity queries over a fingerprint store.

Similarity is the Euclidean distance between fingerprint histograms; small
distance means similar content. Two query modes: k nearest stations, or all
stations within a radius (possibly empty). A brute-force scan is plenty at
catalog scale (hundreds of stations, ~11 dims).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from stationprint.errors import ShapeError, StationNotFoundError, StoreVersionError
from stationprint.fingerprint import (
    MASS_CHECK_TOLERANCE,
    TARGET_MASS,
    WHOLE_DAY,
    Fingerprint,
    read_fingerprint_records,
)


@dataclass(frozen=True)
class Recommendation:
    station_id: str
    distance: float
    genres: tuple = ()


@dataclass
class FingerprintStore:
    """Immutable snapshot of fingerprints keyed by (station, partition)."""

    model_version: str = ""
    _by_partition: dict = field(default_factory=dict)
    genres: dict = field(default_factory=dict)

    @classmethod
    def from_file(cls, path, catalog=None) -> "FingerprintStore":
        store = cls()
        version = None
        for fp, fp_version in read_fingerprint_records(path):
            if version is None:
                version = fp_version
            elif fp_version != version:
                raise StoreVersionError(
                    f"{path}: mixes model versions {version!r} and {fp_version!r}"
                )
            store.add(fp)
        store.model_version = version or ""
        if catalog is not None:
            store.genres = {r.station_id: tuple(r.genres) for r in catalog}
        return store

    def add(self, fp: Fingerprint):
        partition = self._by_partition.setdefault(fp.partition, {})
        first = next(iter(self._iter_all()), None)
        if first is not None and first.n != fp.n:
            raise ShapeError(
                f"fingerprint for {fp.station_id} has n={fp.n}, store has n={first.n}"
            )
        partition[fp.station_id] = fp

    def _iter_all(self):
        for partition in self._by_partition.values():
            yield from partition.values()

    def partitions_of(self, station_id: str) -> list:
        return sorted(
            partition
            for partition, stations in self._by_partition.items()
            if station_id in stations
        )

    def station_ids(self, partition: str = WHOLE_DAY) -> list:
        return sorted(self._by_partition.get(partition, {}))

    def get(self, station_id: str, partition: str = WHOLE_DAY) -> Fingerprint:
        try:
            return self._by_partition[partition][station_id]
        except KeyError:
            raise StationNotFoundError(f"{station_id!r} (partition {partition})") from None

    def __len__(self):
        return sum(len(p) for p in self._by_partition.values())


def distance(fp_a: Fingerprint, fp_b: Fingerprint) -> float:
    """Euclidean distance between two fingerprints of equal cluster count.

    Fingerprints from different partitions compare only when both are
    mass-normalized to the whole-day mass (576), so the scales agree.
    """
    if fp_a.n != fp_b.n:
        raise ShapeError(f"fingerprint sizes differ: {fp_a.n} vs {fp_b.n}")
    if fp_a.partition != fp_b.partition:
        for fp in (fp_a, fp_b):
            if abs(fp.mass - TARGET_MASS) > MASS_CHECK_TOLERANCE:
                raise ShapeError(
                    f"cross-partition distance needs mass {TARGET_MASS}, "
                    f"{fp.station_id}/{fp.partition} has {fp.mass:.6f}"
                )
    return float(np.linalg.norm(fp_a.histogram - fp_b.histogram))


def _ranked(store: FingerprintStore, station_id: str, partition: str):
    query = store.get(station_id, partition)
    results = []
    for other_id in store.station_ids(partition):
        if other_id == station_id:
            continue
        d = distance(query, store.get(other_id, partition))
        results.append(Recommendation(other_id, d, store.genres.get(other_id, ())))
    results.sort(key=lambda r: (r.distance, r.station_id))
    return results


def nearest_k(store: FingerprintStore, station_id: str, k: int,
              partition: str = WHOLE_DAY) -> list:
    """The k closest other stations, ascending by distance; fewer if the
    store is small. Ties order by station id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return _ranked(store, station_id, partition)[:k]


def within_radius(store: FingerprintStore, station_id: str, radius: float,
                  partition: str = WHOLE_DAY) -> list:
    """All other stations with distance <= radius, ascending; may be empty."""
    if radius < 0 or math.isnan(radius):
        raise ValueError("radius must be >= 0")
    return [r for r in _ranked(store, station_id, partition) if r.distance <= radius]
