"""Binary archives for spectrograms and embeddings.

One file = 8-byte header (magic + version), then self-describing records:
station id, capture timestamp, shape, a JSON meta blob, and the payload as
row-major little-endian 32-bit floats.
"""

import json
import struct
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

SPECTROGRAM_MAGIC = b"SPGA"
EMBEDDING_MAGIC = b"EMBA"
VERSION = 1


@dataclass(frozen=True)
class ArchiveRecord:
    station_id: str
    timestamp: datetime
    values: np.ndarray
    meta: dict


class ArchiveWriter:
    def __init__(self, path, magic: bytes):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "wb")
        self._fh.write(magic + struct.pack("<I", VERSION))
        self.count = 0

    def append(self, station_id: str, timestamp: datetime, values: np.ndarray, meta: dict = None):
        values = np.ascontiguousarray(values, dtype="<f4")
        id_bytes = station_id.encode("utf-8")
        meta_bytes = json.dumps(meta or {}, sort_keys=True).encode("utf-8")
        header = struct.pack("<H", len(id_bytes)) + id_bytes
        header += struct.pack("<q", int(timestamp.timestamp()))
        header += struct.pack("<B", values.ndim)
        header += struct.pack(f"<{values.ndim}I", *values.shape)
        header += struct.pack("<I", len(meta_bytes)) + meta_bytes
        self._fh.write(header)
        self._fh.write(values.tobytes())
        self.count += 1

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_archive(path, magic: bytes):
    """Yield ArchiveRecords; validates the magic and version."""
    data = Path(path).read_bytes()
    if data[:4] != magic:
        raise ValueError(f"{path}: expected magic {magic!r}, found {data[:4]!r}")
    (version,) = struct.unpack("<I", data[4:8])
    if version != VERSION:
        raise ValueError(f"{path}: unsupported archive version {version}")
    pos = 8
    while pos < len(data):
        (id_len,) = struct.unpack("<H", data[pos:pos + 2])
        pos += 2
        station_id = data[pos:pos + id_len].decode("utf-8")
        pos += id_len
        (ts,) = struct.unpack("<q", data[pos:pos + 8])
        pos += 8
        ndim = data[pos]
        pos += 1
        shape = struct.unpack(f"<{ndim}I", data[pos:pos + 4 * ndim])
        pos += 4 * ndim
        (meta_len,) = struct.unpack("<I", data[pos:pos + 4])
        pos += 4
        meta = json.loads(data[pos:pos + meta_len]) if meta_len else {}
        pos += meta_len
        n_values = int(np.prod(shape))
        values = np.frombuffer(data[pos:pos + 4 * n_values], dtype="<f4").reshape(shape)
        pos += 4 * n_values
        yield ArchiveRecord(
            station_id=station_id,
            timestamp=datetime.fromtimestamp(ts, tz=timezone.utc),
            values=values,
            meta=meta,
        )


def load_archive(path, magic: bytes) -> list:
    return list(read_archive(path, magic))
