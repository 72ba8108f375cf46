"""HTTP recommendation API over a fingerprint store snapshot.

All queries run against an immutable snapshot (store + catalog + analysis
artifacts). `POST /admin/reload` swaps in a freshly loaded snapshot
atomically; a reload token, when configured, gates that endpoint.
Responses are deterministic for a fixed snapshot.
"""

import csv
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

from fastapi import FastAPI, Header, Query, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from stationprint.collector.catalog import load_catalog
from stationprint.errors import StationNotFoundError, StationprintError, StoreVersionError
from stationprint.fingerprint import PARTITIONS, WHOLE_DAY
from stationprint.recommend import FingerprintStore, nearest_k, within_radius


class StationOut(BaseModel):
    station_id: str
    name: str
    genres: List[str]
    partitions: List[str]


class RecommendationOut(BaseModel):
    station_id: str
    name: str
    genres: List[str]
    distance: float


class ArchetypeOut(BaseModel):
    partition: str
    index: int
    x: float
    y: float


class HealthOut(BaseModel):
    status: str
    model_version: str


@dataclass
class Snapshot:
    store: FingerprintStore
    names: dict = field(default_factory=dict)
    archetypes: list = field(default_factory=list)

    @property
    def model_version(self) -> str:
        return self.store.model_version


def load_snapshot(store_path, catalog_path=None, analysis_dir=None) -> Snapshot:
    catalog = load_catalog(catalog_path) if catalog_path else None
    store = FingerprintStore.from_file(store_path, catalog=catalog)
    names = {r.station_id: r.name for r in catalog} if catalog else {}
    archetypes = []
    if analysis_dir:
        archetype_csv = Path(analysis_dir) / "archetypes.csv"
        if archetype_csv.exists():
            with open(archetype_csv, newline="", encoding="utf-8") as fh:
                for row in csv.DictReader(fh):
                    archetypes.append(
                        ArchetypeOut(
                            partition=row["partition"],
                            index=int(row["index"]),
                            x=float(row["x"]),
                            y=float(row["y"]),
                        )
                    )
    return Snapshot(store=store, names=names, archetypes=archetypes)


def _error(status: int, detail: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"detail": detail})


def create_app(store_path, catalog_path=None, analysis_dir=None, reload_token: str = "") -> FastAPI:
    app = FastAPI(title="stationprint", version="0.1.0")
    state = {"snapshot": None, "error": None}
    lock = threading.Lock()

    def reload_snapshot():
        try:
            snapshot = load_snapshot(store_path, catalog_path, analysis_dir)
            with lock:
                state["snapshot"] = snapshot
                state["error"] = None
        except (StoreVersionError, StationprintError, OSError) as exc:
            with lock:
                state["snapshot"] = None
                state["error"] = str(exc)

    reload_snapshot()

    def current() -> Snapshot:
        with lock:
            if state["snapshot"] is None:
                raise _Unavailable(state["error"] or "store not loaded")
            return state["snapshot"]

    class _Unavailable(Exception):
        def __init__(self, detail):
            self.detail = detail

    @app.exception_handler(_Unavailable)
    async def unavailable_handler(request: Request, exc: _Unavailable):
        return _error(503, f"fingerprint store unavailable: {exc.detail}")

    @app.get("/health", response_model=HealthOut)
    def health():
        snapshot = current()
        return HealthOut(status="ok", model_version=snapshot.model_version)

    @app.get("/stations", response_model=List[StationOut])
    def stations():
        snapshot = current()
        store = snapshot.store
        known = set(snapshot.names) | {
            sid for partition in PARTITIONS for sid in store.station_ids(partition)
        }
        return [
            StationOut(
                station_id=sid,
                name=snapshot.names.get(sid, sid),
                genres=list(store.genres.get(sid, ())),
                partitions=store.partitions_of(sid),
            )
            for sid in sorted(known)
        ]

    @app.get("/stations/{station_id}/recommendations")
    def recommendations(
        station_id: str,
        k: Optional[str] = Query(default=None),
        radius: Optional[str] = Query(default=None),
        partition: str = Query(default=WHOLE_DAY),
    ):
        snapshot = current()
        if k is not None and radius is not None:
            return _error(400, "k and radius are exclusive query modes")
        if k is None and radius is None:
            return _error(400, "provide either k or radius")
        if partition not in PARTITIONS:
            return _error(400, f"unknown partition {partition!r}")
        try:
            if k is not None:
                try:
                    count = int(k)
                except ValueError:
                    return _error(400, f"k must be an integer, got {k!r}")
                if count < 1:
                    return _error(400, "k must be >= 1")
                results = nearest_k(snapshot.store, station_id, count, partition)
            else:
                try:
                    r = float(radius)
                except ValueError:
                    return _error(400, f"radius must be a number, got {radius!r}")
                if math.isnan(r) or r < 0:
                    return _error(400, "radius must be >= 0")
                results = within_radius(snapshot.store, station_id, r, partition)
        except StationNotFoundError as exc:
            return _error(404, f"unknown station: {exc}")
        payload = [
            RecommendationOut(
                station_id=rec.station_id,
                name=snapshot.names.get(rec.station_id, rec.station_id),
                genres=list(rec.genres),
                distance=rec.distance,
            ).model_dump()
            for rec in results
        ]
        return JSONResponse(content=payload)

    @app.get("/archetypes", response_model=List[ArchetypeOut])
    def archetypes(partition: Optional[str] = Query(default=None)):
        snapshot = current()
        if partition is not None and partition not in PARTITIONS:
            return _error(400, f"unknown partition {partition!r}")
        return [
            a for a in snapshot.archetypes
            if partition is None or a.partition == partition
        ]

    @app.post("/admin/reload", response_model=HealthOut)
    def admin_reload(x_admin_token: str = Header(default="")):
        if reload_token and x_admin_token != reload_token:
            return _error(403, "bad admin token")
        reload_snapshot()
        snapshot = current()
        return HealthOut(status="reloaded", model_version=snapshot.model_version)

    return app
