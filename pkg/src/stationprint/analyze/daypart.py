"""Archetype neighborhoods and day-time fingerprint analyses."""

import logging

import numpy as np

from stationprint.analyze.archetypes import ArchetypeModel, archetypal_analysis
from stationprint.analyze.pca import PcaProjection
from stationprint.fingerprint import (
    MASS_CHECK_TOLERANCE,
    PARTITIONS,
    TARGET_MASS,
    TIME_PARTITIONS,
    WHOLE_DAY,
    normalize_fingerprint,
)
from stationprint.recommend import FingerprintStore, distance

log = logging.getLogger(__name__)


def archetype_neighborhood(model: ArchetypeModel, projection: PcaProjection,
                           archetype_index: int, radius: float) -> list:
    """Stations whose 2-D coordinates lie within radius of the archetype's
    2-D position, ascending by distance; entries are (station_id, distance).

    Distances are measured in the PCA plane, matching how archetype
    positions are reported.
    """
    if not 0 <= archetype_index < model.k:
        raise IndexError(f"archetype index {archetype_index} out of range")
    if radius < 0:
        raise ValueError("radius must be >= 0")
    center = projection.project(model.archetypes[archetype_index])[0]
    dists = np.linalg.norm(projection.coords - center, axis=1)
    order = np.argsort(dists, kind="stable")
    return [
        (projection.station_ids[i] if projection.station_ids else int(i), float(dists[i]))
        for i in order
        if dists[i] <= radius
    ]


def _normalized_partitions(store: FingerprintStore, station_id: str) -> dict:
    """Partition fingerprints of one station, all normalized to mass 576.

    Whole-day fingerprints of a full-day crawl already carry that mass;
    windowed (desk-scale) runs are rescaled here so day parts stay
    comparable. Time partitions must arrive normalized from the store.
    """
    out = {}
    for partition in store.partitions_of(station_id):
        fp = store.get(station_id, partition)
        if partition == WHOLE_DAY:
            fp = normalize_fingerprint(fp)
        elif abs(fp.mass - TARGET_MASS) > MASS_CHECK_TOLERANCE:
            log.warning(
                "%s/%s: mass %.3f is not normalized to %d, skipping station",
                station_id, partition, fp.mass, TARGET_MASS,
            )
            return {}
        out[partition] = fp
    return out


def daytime_trajectories(store: FingerprintStore, projection: PcaProjection) -> dict:
    """Per-station trajectory through the PCA plane across day parts.

    Point order is fixed: whole_day, night, morning, day (available ones).
    Stations without whole_day plus at least one time partition are skipped
    with a warning. Pairwise partition distances are measured in fingerprint
    space.
    """
    trajectories = {}
    for station_id in store.station_ids(WHOLE_DAY):
        fps = _normalized_partitions(store, station_id)
        ordered = [p for p in PARTITIONS if p in fps]
        if WHOLE_DAY not in ordered or len(ordered) < 2:
            log.warning("%s: missing day-time partitions, skipped", station_id)
            continue
        points = [
            (partition, projection.project(fps[partition].histogram)[0].tolist())
            for partition in ordered
        ]
        pair_distances = {}
        for i, p1 in enumerate(ordered):
            for p2 in ordered[i + 1:]:
                pair_distances[f"{p1}|{p2}"] = distance(fps[p1], fps[p2])
        trajectories[station_id] = {"points": points, "distances": pair_distances}
    return trajectories


def daytime_archetypes(store: FingerprintStore, partitions=TIME_PARTITIONS,
                       k: int = 4, seed: int = 0) -> dict:
    """Independent archetypal analysis per day-time partition.

    Only stations carrying every requested partition participate, so the
    per-partition models are comparable. Returns per partition a dict with
    the model, the station ids and the archetype coordinates (to be placed
    in a shared PCA plane by the caller via `project`).
    """
    station_ids = [
        s for s in store.station_ids(WHOLE_DAY)
        if all(p in store.partitions_of(s) for p in partitions)
    ]
    if not station_ids:
        return {}
    results = {}
    for partition in partitions:
        X = np.stack([store.get(s, partition).histogram for s in station_ids])
        model = archetypal_analysis(X, k, seed)
        results[partition] = {"model": model, "station_ids": station_ids}
    return results
