"""ICY (Shoutcast/Icecast) stream access and in-band metadata demuxing.

The wire format: when the client sends `Icy-MetaData: 1` and the server
answers with `icy-metaint: N`, the body carries N audio bytes, then one
length byte L, then exactly 16*L metadata bytes, repeating. L = 0 means an
empty metadata block. Titles travel as `StreamTitle='...';`, null-padded.
"""

import re
import socket
import urllib.error
import urllib.request
from dataclasses import dataclass
from typing import Optional

from stationprint.errors import DemuxError, NotAStreamError, StreamUnreachableError

AUDIO_CONTENT_TYPES = ("audio/", "application/ogg")
_TITLE_RE = re.compile(r"StreamTitle='(.*?)';")


@dataclass(frozen=True)
class IcyStreamHeader:
    """Parsed `icy-*` response headers. metaint = 0 means no in-band metadata."""

    metaint: int = 0
    name: Optional[str] = None
    genre: Optional[str] = None
    bitrate_kbps: Optional[int] = None
    content_type: str = ""


@dataclass(frozen=True)
class MetadataEvent:
    """One non-empty metadata block, positioned by its audio-byte offset."""

    offset: int
    title: Optional[str]
    raw: str


def open_icy_stream(url: str, want_metadata: bool = True, timeout: float = 10.0):
    """Open an ICY/HTTP audio stream; returns (IcyStreamHeader, response body).

    The body is a file-like object yielding the raw (still muxed) byte stream.
    """
    request = urllib.request.Request(url, headers={"User-Agent": "stationprint/0.1"})
    if want_metadata:
        request.add_header("Icy-MetaData", "1")
    try:
        response = urllib.request.urlopen(request, timeout=timeout)
    except (urllib.error.URLError, socket.timeout, OSError, ValueError) as exc:
        raise StreamUnreachableError(f"{url}: {exc}") from exc

    headers = response.headers
    content_type = (headers.get("Content-Type") or "").strip()
    if not content_type.lower().startswith(AUDIO_CONTENT_TYPES):
        response.close()
        raise NotAStreamError(f"{url}: content type {content_type!r} is not audio")

    metaint = 0
    raw_metaint = headers.get("icy-metaint")
    if raw_metaint is not None:
        try:
            metaint = max(0, int(raw_metaint.strip()))
        except ValueError:
            metaint = 0
    bitrate = None
    raw_br = headers.get("icy-br")
    if raw_br is not None:
        try:
            bitrate = int(raw_br.strip().split(",")[0])
        except ValueError:
            bitrate = None

    header = IcyStreamHeader(
        metaint=metaint,
        name=headers.get("icy-name"),
        genre=headers.get("icy-genre"),
        bitrate_kbps=bitrate,
        content_type=content_type,
    )
    return header, response


def parse_metadata_block(block: bytes, offset: int) -> MetadataEvent:
    text = block.decode("utf-8", errors="replace").rstrip("\x00")
    match = _TITLE_RE.search(text)
    return MetadataEvent(offset=offset, title=match.group(1) if match else None, raw=text)


class IcyDemuxer:
    """Incremental demuxer: feed muxed bytes, get audio bytes back.

    Metadata events accumulate on `.events` with their audio-byte offsets.
    With metaint = 0 the demuxer is a passthrough.
    """

    def __init__(self, metaint: int):
        if metaint < 0:
            raise ValueError("metaint must be >= 0")
        self.metaint = metaint
        self.events = []
        self._audio_seen = 0
        self._until_meta = metaint
        self._meta_needed = 0  # bytes still missing from the current block
        self._meta_buf = bytearray()
        self._expect_length_byte = False

    def feed(self, data: bytes) -> bytes:
        if self.metaint == 0:
            self._audio_seen += len(data)
            return data
        out = bytearray()
        pos = 0
        while pos < len(data):
            if self._expect_length_byte:
                length = data[pos]
                pos += 1
                self._expect_length_byte = False
                if length == 0:
                    self._until_meta = self.metaint
                else:
                    self._meta_needed = 16 * length
                    self._meta_buf.clear()
                continue
            if self._meta_needed > 0:
                take = min(self._meta_needed, len(data) - pos)
                self._meta_buf += data[pos:pos + take]
                pos += take
                self._meta_needed -= take
                if self._meta_needed == 0:
                    self.events.append(
                        parse_metadata_block(bytes(self._meta_buf), self._audio_seen)
                    )
                    self._until_meta = self.metaint
                continue
            take = min(self._until_meta, len(data) - pos)
            out += data[pos:pos + take]
            pos += take
            self._audio_seen += take
            self._until_meta -= take
            if self._until_meta == 0:
                self._expect_length_byte = True
        return bytes(out)

    def finish(self):
        """Assert the stream did not end inside a metadata block.

        Ending exactly at a metaint boundary (next length byte never sent) is
        fine; only a partially transmitted metadata block is an error.
        """
        if self._meta_needed > 0:
            raise DemuxError("stream truncated inside metadata block", self._audio_seen)


def demux_icy(data: bytes, metaint: int):
    """Demux a complete muxed byte string; returns (audio bytes, events).

    Raises DemuxError if the data ends inside a metadata block.
    """
    demuxer = IcyDemuxer(metaint)
    audio = demuxer.feed(data)
    demuxer.finish()
    return audio, demuxer.events


def mux_icy(audio: bytes, metaint: int, titles=()) -> bytes:
    """Inverse of demux_icy, used by the mock server and round-trip tests.

    Inserts one metadata block after every full metaint of audio; the i-th
    block carries titles[i] when provided, else an empty (L = 0) block.
    """
    if metaint <= 0:
        return audio
    out = bytearray()
    block_index = 0
    for start in range(0, len(audio), metaint):
        chunk = audio[start:start + metaint]
        out += chunk
        if len(chunk) < metaint:
            return bytes(out)  # final partial span carries no metadata
        title = titles[block_index] if block_index < len(titles) else None
        out += encode_metadata_block(title)
        block_index += 1
    return bytes(out)


def encode_metadata_block(title: Optional[str]) -> bytes:
    if title is None:
        return b"\x00"
    payload = f"StreamTitle='{title}';".encode("utf-8")
    length = (len(payload) + 15) // 16
    if length > 255:
        raise ValueError("title too long for a single metadata block")
    return bytes([length]) + payload.ljust(16 * length, b"\x00")
