"""Test double for upstream radio streams: catalog endpoint + ICY streams.

Serves `GET /services` (catalog JSON) and `GET /stream/<id>` per fixture
station. Streams are WAV/PCM loops with optional in-band metadata, byte-rate
pacing and fault injection (drop after N body bytes).
"""

import itertools
import json
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional

from stationprint.collector.audio import read_wav, wav_stream_header
from stationprint.collector.icy import encode_metadata_block


@dataclass
class StationFixture:
    """One mock station: a looping WAV plus ICY behavior knobs."""

    station_id: str
    name: str
    wav_path: Path
    genres: tuple = ()
    metaint: int = 0
    titles: tuple = ()
    bitrate_kbps: int = 256
    bytes_per_sec: Optional[float] = None  # None = unpaced
    drop_after_bytes: Optional[int] = None
    fault_connections: Optional[int] = None  # how many connections fault; None = all
    _connections: int = field(default=0, repr=False)

    @classmethod
    def from_json(cls, obj: dict, base_dir: Path) -> "StationFixture":
        return cls(
            station_id=obj["id"],
            name=obj.get("name", obj["id"]),
            wav_path=base_dir / obj["wav"],
            genres=tuple(obj.get("genres") or ()),
            metaint=int(obj.get("metaint", 0)),
            titles=tuple(obj.get("titles") or ()),
            bitrate_kbps=int(obj.get("bitrate_kbps", 256)),
            bytes_per_sec=obj.get("bytes_per_sec"),
            drop_after_bytes=obj.get("drop_after_bytes"),
            fault_connections=obj.get("fault_connections"),
        )


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "MockIcy/0.1"

    def log_message(self, *args):
        pass

    def do_GET(self):
        if self.path == "/services":
            self._serve_catalog()
        elif self.path.startswith("/stream/"):
            self._serve_stream(self.path[len("/stream/"):])
        elif self.path == "/health":
            self._send_json({"status": "ok"})
        else:
            self.send_error(404)

    def _send_json(self, obj):
        payload = json.dumps(obj).encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def _serve_catalog(self):
        host = self.headers.get("Host") or f"{self.server.server_address[0]}:{self.server.server_address[1]}"
        self._send_json(
            [
                {
                    "id": f.station_id,
                    "name": f.name,
                    "genres": list(f.genres),
                    "url": f"http://{host}/stream/{f.station_id}",
                }
                for f in self.server.fixtures.values()
            ]
        )

    def _serve_stream(self, station_id: str):
        fixture = self.server.fixtures.get(station_id)
        if fixture is None:
            self.send_error(404, "unknown station")
            return
        with self.server.lock:
            fixture._connections += 1
            conn_index = fixture._connections
        faulty = fixture.drop_after_bytes is not None and (
            fixture.fault_connections is None or conn_index <= fixture.fault_connections
        )
        wants_meta = self.headers.get("Icy-MetaData", "0").strip() == "1"
        metaint = fixture.metaint if (wants_meta and fixture.metaint > 0) else 0

        self.send_response(200)
        self.send_header("Content-Type", "audio/wav")
        self.send_header("icy-name", fixture.name)
        if fixture.genres:
            self.send_header("icy-genre", ",".join(fixture.genres))
        self.send_header("icy-br", str(fixture.bitrate_kbps))
        if metaint:
            self.send_header("icy-metaint", str(metaint))
        self.end_headers()

        try:
            self._pump(fixture, metaint, faulty)
        except (BrokenPipeError, ConnectionResetError):
            pass
        # streamed responses end with the connection
        self.close_connection = True

    def _pump(self, fixture, metaint, faulty):
        samples, rate = self.server.audio[fixture.station_id]
        pcm = samples.tobytes()
        audio_iter = itertools.chain([wav_stream_header(rate)], itertools.cycle([pcm]))
        titles = itertools.cycle(fixture.titles) if fixture.titles else None

        sent = 0
        until_meta = metaint
        started = time.monotonic()
        # paced streams write in small chunks so the sleep below can keep
        # sent <= bytes_per_sec * elapsed + chunk at all times
        chunk_cap = 4096 if fixture.bytes_per_sec else None
        for block in audio_iter:
            pos = 0
            while pos < len(block):
                if metaint:
                    take = min(until_meta, len(block) - pos)
                else:
                    take = len(block) - pos
                if chunk_cap:
                    take = min(take, chunk_cap)
                chunk = block[pos:pos + take]
                if faulty and sent + len(chunk) >= fixture.drop_after_bytes:
                    self.wfile.write(chunk[: fixture.drop_after_bytes - sent])
                    self.wfile.flush()
                    return
                self.wfile.write(chunk)
                sent += len(chunk)
                pos += take
                if metaint:
                    until_meta -= take
                    if until_meta == 0:
                        self.wfile.write(
                            encode_metadata_block(next(titles) if titles else None)
                        )
                        until_meta = metaint
                if fixture.bytes_per_sec:
                    ahead = sent / fixture.bytes_per_sec - (time.monotonic() - started)
                    if ahead > 0:
                        time.sleep(ahead)
                if self.server.stopping.is_set():
                    return


class MockIcyServer:
    """Threaded mock server; bind to port 0 for an ephemeral port."""

    def __init__(self, fixtures, bind=("127.0.0.1", 0)):
        self.httpd = ThreadingHTTPServer(bind, _Handler)
        self.httpd.daemon_threads = True
        self.httpd.fixtures = {f.station_id: f for f in fixtures}
        self.httpd.audio = {f.station_id: read_wav(f.wav_path) for f in fixtures}
        self.httpd.lock = threading.Lock()
        self.httpd.stopping = threading.Event()
        self._thread = None

    @classmethod
    def from_fixture_dir(cls, fixture_dir, bind=("127.0.0.1", 0)) -> "MockIcyServer":
        base = Path(fixture_dir)
        spec = json.loads((base / "stations.json").read_text(encoding="utf-8"))
        return cls([StationFixture.from_json(obj, base) for obj in spec], bind)

    @property
    def address(self) -> str:
        host, port = self.httpd.server_address[:2]
        return f"{host}:{port}"

    @property
    def catalog_url(self) -> str:
        return f"http://{self.address}/services"

    def stream_url(self, station_id: str) -> str:
        return f"http://{self.address}/stream/{station_id}"

    def start(self) -> "MockIcyServer":
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self):
        self.httpd.stopping.set()
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread:
            self._thread.join(timeout=5)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()
