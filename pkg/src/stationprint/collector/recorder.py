"""Scheduled snippet recording: one independent task per station.

Stations share nothing but the clock; each writes to its own store subtree
`<root>/<station_id>/<YYYY-MM-DD>/` and owns its manifest. Snippet files are
written atomically (temp file + rename), so a crash never leaves a partial
snippet visible.
"""

import json
import logging
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from stationprint.collector.audio import StreamPcmDecoder, write_wav
from stationprint.collector.icy import IcyDemuxer, open_icy_stream
from stationprint.collector.schedule import SNIPPET_SECONDS, build_schedule, slot_name
from stationprint.errors import StationprintError

log = logging.getLogger(__name__)

READ_CHUNK = 4096


@dataclass(frozen=True)
class AudioSnippet:
    """5 seconds of mono PCM tagged with its station and schedule slot."""

    station_id: str
    capture_time: datetime
    sample_rate: int
    samples: np.ndarray

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass
class RecordingManifest:
    """Per station-day accounting: every slot is either recorded or missing."""

    station_id: str
    day: date
    expected_slots: int
    snippet_count: int = 0
    missing_slots: list = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return self.snippet_count == self.expected_slots and not self.missing_slots

    def to_json(self) -> dict:
        return {
            "station_id": self.station_id,
            "day": self.day.isoformat(),
            "expected_slots": self.expected_slots,
            "snippet_count": self.snippet_count,
            "complete": self.complete,
            "missing_slots": [s.isoformat() for s in self.missing_slots],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RecordingManifest":
        return cls(
            station_id=obj["station_id"],
            day=date.fromisoformat(obj["day"]),
            expected_slots=obj.get("expected_slots", 576),
            snippet_count=obj["snippet_count"],
            missing_slots=[datetime.fromisoformat(s) for s in obj["missing_slots"]],
        )


@dataclass(frozen=True)
class DatasetSummary:
    station_count: int
    complete_count: int
    incomplete_count: int
    total_snippets: int
    incomplete_snippets: int

    def to_json(self) -> dict:
        return {
            "station_count": self.station_count,
            "complete_count": self.complete_count,
            "incomplete_count": self.incomplete_count,
            "total_snippets": self.total_snippets,
            "incomplete_snippets": self.incomplete_snippets,
        }


def summarize_dataset(manifests) -> DatasetSummary:
    """Totals over station-day manifests; complete stations contribute all slots."""
    complete = incomplete = total = from_incomplete = 0
    for manifest in manifests:
        total += manifest.snippet_count
        if manifest.complete:
            complete += 1
        else:
            incomplete += 1
            from_incomplete += manifest.snippet_count
    return DatasetSummary(
        station_count=complete + incomplete,
        complete_count=complete,
        incomplete_count=incomplete,
        total_snippets=total,
        incomplete_snippets=from_incomplete,
    )


class SimulatedClock:
    """Clock whose sleep_until jumps straight to the target time."""

    simulated = True

    def __init__(self, start: datetime):
        self._now = start

    def now(self) -> datetime:
        return self._now

    def sleep_until(self, when: datetime):
        if when > self._now:
            self._now = when

    def sleep(self, seconds: float):
        self._now += timedelta(seconds=seconds)


class RealClock:
    simulated = False

    def now(self) -> datetime:
        return datetime.now(timezone.utc)

    def sleep_until(self, when: datetime):
        delta = (when - self.now()).total_seconds()
        if delta > 0:
            time.sleep(delta)

    def sleep(self, seconds: float):
        time.sleep(seconds)


def _atomic_write_bytes(path: Path, writer):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_manifest(manifest: RecordingManifest, day_dir: Path):
    _atomic_write_bytes(
        day_dir / "manifest.json",
        lambda tmp: Path(tmp).write_text(
            json.dumps(manifest.to_json(), indent=2), encoding="utf-8"
        ),
    )


def load_manifests(store_root) -> list:
    manifests = []
    for path in sorted(Path(store_root).glob("*/*/manifest.json")):
        manifests.append(RecordingManifest.from_json(json.loads(path.read_text())))
    return manifests


class _StationConnection:
    """One open ICY stream with its demuxer and PCM decoder."""

    def __init__(self, url: str, want_metadata: bool, timeout: float):
        self.header, self.body = open_icy_stream(url, want_metadata, timeout)
        self.demuxer = IcyDemuxer(self.header.metaint)
        self.decoder = StreamPcmDecoder(self.header.content_type)

    def read_samples(self) -> np.ndarray:
        """Read one chunk; returns decoded samples (possibly empty). EOFError at end."""
        data = self.body.read(READ_CHUNK)
        if not data:
            raise EOFError("stream ended")
        return self.decoder.feed(self.demuxer.feed(data))

    def close(self):
        try:
            self.body.close()
        except OSError:
            pass


def record_station(
    station,
    slots,
    store_root,
    clock,
    *,
    want_metadata: bool = True,
    timeout: float = 10.0,
    backoff_base: float = 1.0,
    backoff_cap: float = 60.0,
) -> RecordingManifest:
    """Record `slots` for one station; returns the (persisted) manifest.

    Connection failures back off exponentially (base -> cap); any slot that
    cannot be captured in full is recorded as missing and never leaves a
    partial file behind.
    """
    slots = sorted(slots)
    day = slots[0].date()
    day_dir = Path(store_root) / station.station_id / day.isoformat()
    manifest = RecordingManifest(
        station_id=station.station_id,
        day=day,
        expected_slots=len(slots),
        missing_slots=list(slots),
    )
    write_manifest(manifest, day_dir)

    conn = None
    backoff = backoff_base

    def drop_connection():
        nonlocal conn
        if conn is not None:
            conn.close()
            conn = None

    def ensure_connection():
        nonlocal conn, backoff
        while conn is None:
            try:
                conn = _StationConnection(station.bearer_url, want_metadata, timeout)
                backoff = backoff_base
            except StationprintError as exc:
                log.warning("%s: connect failed: %s", station.station_id, exc)
                clock.sleep(backoff)
                backoff = min(backoff * 2, backoff_cap)
                if clock.now() > slots[-1]:
                    return

    for slot in slots:
        if clock.simulated:
            clock.sleep_until(slot)
        else:
            _drain_until(clock, slot, lambda: conn)
        ensure_connection()
        if conn is None or clock.now() > slot + timedelta(seconds=60):
            continue  # stays missing
        try:
            record_snippet(conn, station.station_id, slot, day_dir)
        except (EOFError, OSError, StationprintError) as exc:
            log.warning("%s: slot %s lost: %s", station.station_id, slot_name(slot), exc)
            drop_connection()
            continue
        manifest.missing_slots.remove(slot)
        manifest.snippet_count += 1
        write_manifest(manifest, day_dir)
    write_manifest(manifest, day_dir)
    return manifest


def _drain_until(clock, slot, get_conn):
    """Real-time mode: keep reading (and discarding) so the stream stays live."""
    while clock.now() < slot:
        conn = get_conn()
        if conn is None:
            clock.sleep(min(1.0, max(0.0, (slot - clock.now()).total_seconds())))
            continue
        try:
            conn.read_samples()
        except (EOFError, OSError):
            return


def record_snippet(conn, station_id, slot, day_dir) -> AudioSnippet:
    """Capture exactly 5 s of PCM from an open connection and persist it
    atomically as `<day_dir>/<HHMM>.wav`. A stream failure mid-capture
    raises before anything is written, so no partial file ever appears."""
    parts = []
    collected = 0
    needed = None
    while needed is None or collected < needed:
        samples = conn.read_samples()
        if needed is None and conn.decoder.sample_rate is not None:
            needed = int(round(SNIPPET_SECONDS * conn.decoder.sample_rate))
        if len(samples):
            parts.append(samples)
            collected += len(samples)
    snippet = AudioSnippet(
        station_id=station_id,
        capture_time=slot,
        sample_rate=conn.decoder.sample_rate,
        samples=np.concatenate(parts)[:needed],
    )
    _atomic_write_bytes(
        Path(day_dir) / f"{slot_name(slot)}.wav",
        lambda tmp: write_wav(tmp, snippet.samples, snippet.sample_rate),
    )
    return snippet


def crawl(
    catalog,
    store_root,
    day: date,
    *,
    hours=range(24),
    simulated: bool = True,
    want_metadata: bool = True,
    timeout: float = 10.0,
    max_workers: int = 16,
) -> list:
    """Record the schedule for every catalog station; returns the manifests.

    Simulated mode runs stations sequentially, each against its own simulated
    clock (tasks are independent, so this is equivalent to parallel capture
    and keeps runs deterministic). Real mode uses one thread per station.
    """
    slots = build_schedule(day, hours)
    if simulated:
        manifests = []
        for station in catalog:
            clock = SimulatedClock(slots[0] - timedelta(seconds=1))
            manifests.append(
                record_station(station, slots, store_root, clock, want_metadata=want_metadata, timeout=timeout)
            )
        return manifests
    with ThreadPoolExecutor(max_workers=min(max_workers, len(catalog) or 1)) as pool:
        futures = [
            pool.submit(
                record_station, station, slots, store_root, RealClock(),
                want_metadata=want_metadata, timeout=timeout,
            )
            for station in catalog
        ]
        return [f.result() for f in futures]
