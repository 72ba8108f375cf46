"""Station catalog: a JSON file standing in for the upstream service directory."""

import json
from dataclasses import dataclass, field
from pathlib import Path
from urllib.parse import urlparse

from stationprint.errors import CatalogConflictError, MalformedCatalogError


@dataclass(frozen=True)
class StationRecord:
    """One catalog entry: identity, display name, genre labels and stream URL."""

    station_id: str
    name: str
    genres: tuple = field(default_factory=tuple)
    bearer_url: str = ""

    def validate(self):
        if not self.station_id:
            raise MalformedCatalogError("station id must be non-empty")
        parsed = urlparse(self.bearer_url)
        if parsed.scheme not in ("http", "https") or not parsed.netloc:
            raise MalformedCatalogError(
                f"station {self.station_id!r}: bearer url {self.bearer_url!r} "
                "is not an absolute http(s) URL"
            )


def load_catalog(path) -> list:
    """Load a catalog file: a JSON array of {"id","name","genres":[...],"url"}.

    Duplicate station ids are rejected.
    """
    raw = Path(path).read_text(encoding="utf-8")
    try:
        entries = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedCatalogError(f"catalog {path}: {exc}") from exc
    if not isinstance(entries, list):
        raise MalformedCatalogError(f"catalog {path}: top-level value must be an array")

    records = []
    seen = set()
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict) or "id" not in entry or "url" not in entry:
            raise MalformedCatalogError(
                f"catalog {path}: entry {i} must be an object with 'id' and 'url'"
            )
        record = StationRecord(
            station_id=str(entry["id"]),
            name=str(entry.get("name", entry["id"])),
            genres=tuple(entry.get("genres") or ()),
            bearer_url=str(entry["url"]),
        )
        record.validate()
        if record.station_id in seen:
            raise CatalogConflictError(f"duplicate station id {record.station_id!r}")
        seen.add(record.station_id)
        records.append(record)
    return records


def dump_catalog(records, path):
    """Write records back out in the catalog file schema."""
    entries = [
        {
            "id": r.station_id,
            "name": r.name,
            "genres": list(r.genres),
            "url": r.bearer_url,
        }
        for r in records
    ]
    Path(path).write_text(json.dumps(entries, indent=2), encoding="utf-8")
