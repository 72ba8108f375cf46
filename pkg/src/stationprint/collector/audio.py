"""PCM decoding for captured streams.

Only uncompressed RIFF/WAV (PCM 16-bit) is decoded natively; compressed
codecs are a pluggable boundary (register_decoder). Stereo input is
downmixed to mono by channel average.
"""

import struct
from pathlib import Path

import numpy as np

from stationprint.errors import CodecUnsupportedError

WAV_CONTENT_TYPES = ("audio/wav", "audio/x-wav", "audio/wave", "audio/vnd.wave")


def _downmix(frames: np.ndarray, channels: int) -> np.ndarray:
    if channels == 1:
        return frames
    shaped = frames.reshape(-1, channels).astype(np.int32)
    return np.round(shaped.mean(axis=1)).astype(np.int16)


class WavHeaderError(CodecUnsupportedError):
    pass


def _parse_wav_header(data: bytes):
    """Return (channels, rate, bits, data_offset) for a RIFF/WAV PCM header.

    Returns None if more bytes are needed; raises WavHeaderError on non-PCM.
    """
    if len(data) < 12:
        return None
    if data[0:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavHeaderError("not a RIFF/WAVE stream")
    pos = 12
    fmt = None
    while True:
        if len(data) < pos + 8:
            return None
        chunk_id = data[pos:pos + 4]
        size = struct.unpack("<I", data[pos + 4:pos + 8])[0]
        if chunk_id == b"fmt ":
            if len(data) < pos + 8 + 16:
                return None
            audio_format, channels, rate, _, _, bits = struct.unpack(
                "<HHIIHH", data[pos + 8:pos + 24]
            )
            if audio_format != 1 or bits != 16:
                raise WavHeaderError(
                    f"only PCM 16-bit WAV is supported (format={audio_format}, bits={bits})"
                )
            fmt = (channels, rate, bits)
            pos += 8 + size + (size & 1)
        elif chunk_id == b"data":
            if fmt is None:
                raise WavHeaderError("WAV data chunk before fmt chunk")
            return fmt + (pos + 8,)
        else:
            pos += 8 + size + (size & 1)


def decode_audio(data: bytes, content_type: str):
    """Decode a complete audio payload into (mono int16 samples, sample rate)."""
    base_type = content_type.split(";")[0].strip().lower()
    decoder = _DECODERS.get(base_type)
    if decoder is None:
        raise CodecUnsupportedError(f"no decoder for content type {content_type!r}")
    return decoder(data)


def _decode_wav(data: bytes):
    parsed = _parse_wav_header(data)
    if parsed is None:
        raise WavHeaderError("truncated WAV header")
    channels, rate, _, offset = parsed
    payload = data[offset:]
    usable = len(payload) - len(payload) % (2 * channels)
    frames = np.frombuffer(payload[:usable], dtype="<i2")
    return _downmix(frames, channels), rate


_DECODERS = {ct: _decode_wav for ct in WAV_CONTENT_TYPES}


def register_decoder(content_type: str, decoder):
    """Plug in a decoder for a compressed codec: bytes -> (mono int16, rate)."""
    _DECODERS[content_type.split(";")[0].strip().lower()] = decoder


class StreamPcmDecoder:
    """Incremental decoder for a continuous WAV/PCM byte stream.

    The RIFF header arrives once at stream start (declared sizes are ignored,
    streams are open-ended); after that every feed() yields the mono samples
    completed so far.
    """

    def __init__(self, content_type: str):
        base_type = content_type.split(";")[0].strip().lower()
        if base_type not in WAV_CONTENT_TYPES:
            raise CodecUnsupportedError(
                f"streaming decode not supported for {content_type!r}"
            )
        self._header = bytearray()
        self._pending = bytearray()
        self.channels = None
        self.sample_rate = None

    def feed(self, data: bytes) -> np.ndarray:
        if self.channels is None:
            self._header += data
            parsed = _parse_wav_header(bytes(self._header))
            if parsed is None:
                return np.zeros(0, dtype=np.int16)
            self.channels, self.sample_rate, _, offset = parsed
            self._pending += self._header[offset:]
            self._header = bytearray()
        else:
            self._pending += data
        frame_bytes = 2 * self.channels
        usable = len(self._pending) - len(self._pending) % frame_bytes
        if usable == 0:
            return np.zeros(0, dtype=np.int16)
        frames = np.frombuffer(bytes(self._pending[:usable]), dtype="<i2")
        del self._pending[:usable]
        return _downmix(frames, self.channels)


def write_wav(path, samples: np.ndarray, rate: int):
    """Write mono int16 samples as a canonical 44-byte-header WAV file."""
    samples = np.asarray(samples, dtype="<i2")
    payload = samples.tobytes()
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    header += b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, rate, rate * 2, 2, 16)
    header += b"data" + struct.pack("<I", len(payload))
    Path(path).write_bytes(header + payload)


def read_wav(path):
    """Read a WAV file into (mono int16 samples, sample rate)."""
    return _decode_wav(Path(path).read_bytes())


def wav_stream_header(rate: int, channels: int = 1) -> bytes:
    """RIFF header for an open-ended stream (maximal declared sizes)."""
    header = b"RIFF" + struct.pack("<I", 0xFFFFFFFF) + b"WAVE"
    header += b"fmt " + struct.pack(
        "<IHHIIHH", 16, 1, channels, rate, rate * 2 * channels, 2 * channels, 16
    )
    header += b"data" + struct.pack("<I", 0xFFFFFFFF)
    return header
