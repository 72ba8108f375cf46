"""Mel spectrogram front-end for 5-second snippets.

Each snippet becomes a frames x 128 matrix: Hann-windowed frames of 0.08 s
every 0.04 s, magnitude spectra (zero-padded FFT), triangular mel projection,
dB relative to the snippet maximum, clipped at -60 dB and mapped to [-1, 1].
The max-referenced dB makes the output invariant to input gain.
"""

from dataclasses import dataclass, field

import numpy as np

from stationprint.errors import FilterbankDegenerateError, ShapeError

DB_REF_EPSILON = 1e-10  # silence guard for the dB reference


@dataclass(frozen=True)
class SpectrogramParams:
    n_mels: int = 128
    window_s: float = 0.08
    hop_s: float = 0.04
    clip_db: float = -60.0
    target_rate: int = 16000
    snippet_s: float = 5.0

    def __post_init__(self):
        if self.hop_s > self.window_s:
            raise ValueError("hop must not exceed window")
        if self.n_mels < 1:
            raise ValueError("need at least one mel band")
        if self.clip_db >= 0:
            raise ValueError("clip level must be negative dB")

    @property
    def window_samples(self) -> int:
        return int(round(self.window_s * self.target_rate))

    @property
    def hop_samples(self) -> int:
        return int(round(self.hop_s * self.target_rate))

    @property
    def n_fft(self) -> int:
        return 1 << (self.window_samples - 1).bit_length()

    @property
    def frames_per_snippet(self) -> int:
        total = int(round(self.snippet_s * self.target_rate))
        return (total - self.window_samples) // self.hop_samples + 1

    def to_json(self) -> dict:
        return {
            "n_mels": self.n_mels,
            "window_s": self.window_s,
            "hop_s": self.hop_s,
            "clip_db": self.clip_db,
            "target_rate": self.target_rate,
            "snippet_s": self.snippet_s,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SpectrogramParams":
        return cls(**obj)


@dataclass(frozen=True)
class MelSpectrogram:
    values: np.ndarray  # frames x n_mels, in [-1, 1]
    params: SpectrogramParams = field(default_factory=SpectrogramParams)

    @property
    def frames(self) -> int:
        return self.values.shape[0]


def hertz_to_mel(freq):
    return 2595.0 * np.log10(1.0 + np.asarray(freq, dtype=np.float64) / 700.0)


def mel_to_hertz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_center_frequencies(n_mels: int, sample_rate: int) -> np.ndarray:
    """Hz centers of the triangular filters (without the two edge points)."""
    edges = np.linspace(0.0, hertz_to_mel(sample_rate / 2), n_mels + 2)
    return mel_to_hertz(edges)[1:-1]


def mel_filterbank(n_mels: int, n_fft: int, sample_rate: int) -> np.ndarray:
    """Triangular filters over FFT bins: n_mels x (n_fft/2 + 1), unit peaks."""
    if n_fft & (n_fft - 1):
        raise ValueError("n_fft must be a power of two")
    mel_points = mel_to_hertz(np.linspace(0.0, hertz_to_mel(sample_rate / 2), n_mels + 2))
    fft_freqs = np.arange(n_fft // 2 + 1) * (sample_rate / n_fft)

    bank = np.zeros((n_mels, n_fft // 2 + 1))
    for m in range(n_mels):
        left, center, right = mel_points[m], mel_points[m + 1], mel_points[m + 2]
        up = (fft_freqs - left) / (center - left)
        down = (right - fft_freqs) / (right - center)
        bank[m] = np.maximum(0.0, np.minimum(up, down))

    if not bank.any(axis=1).all():
        raise FilterbankDegenerateError(
            f"{n_mels} mel bands leave empty filters at n_fft={n_fft}, rate={sample_rate}"
        )
    return bank


def resample_mono(pcm: np.ndarray, source_rate: int, target_rate: int) -> np.ndarray:
    """Linear-interpolation resampling; output length = round(len * target/source)."""
    if source_rate <= 0:
        raise ValueError("source rate must be positive")
    pcm = np.asarray(pcm, dtype=np.float64)
    if source_rate == target_rate:
        return pcm.copy()
    out_len = int(round(len(pcm) * target_rate / source_rate))
    if len(pcm) == 0 or out_len == 0:
        return np.zeros(0)
    positions = np.arange(out_len) * (source_rate / target_rate)
    positions = np.minimum(positions, len(pcm) - 1)
    return np.interp(positions, np.arange(len(pcm)), pcm)


def _hann(length: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(length) / length)


def mel_spectrogram(pcm: np.ndarray, params: SpectrogramParams = SpectrogramParams()) -> MelSpectrogram:
    """Snippet PCM (already at params.target_rate) -> normalized mel spectrogram."""
    pcm = np.asarray(pcm, dtype=np.float64)
    win = params.window_samples
    hop = params.hop_samples
    if len(pcm) < win:
        raise ShapeError(f"snippet of {len(pcm)} samples is shorter than one window ({win})")

    n_frames = (len(pcm) - win) // hop + 1
    idx = np.arange(win)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = pcm[idx] * _hann(win)[None, :]

    magnitudes = np.abs(np.fft.rfft(frames, n=params.n_fft, axis=1))
    bank = mel_filterbank(params.n_mels, params.n_fft, params.target_rate)
    mel = magnitudes @ bank.T

    ref = max(mel.max(), DB_REF_EPSILON)
    db = 20.0 * np.log10(np.maximum(mel, 1e-30) / ref)
    db = np.clip(db, params.clip_db, 0.0)
    normalized = 1.0 + 2.0 * db / (-params.clip_db)  # clip_db -> -1, 0 dB -> +1
    return MelSpectrogram(values=normalized, params=params)
