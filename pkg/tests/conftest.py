"""Shared fixtures: synthetic audio, catalogs and mock stream setups."""

import json
from pathlib import Path

import numpy as np
import pytest

from stationprint.collector.audio import write_wav


def make_sine(freq: float, seconds: float = 5.0, rate: int = 16000, amplitude: float = 0.5) -> np.ndarray:
    t = np.arange(int(round(seconds * rate))) / rate
    return np.round(amplitude * 32767 * np.sin(2 * np.pi * freq * t)).astype(np.int16)


def make_noise(seconds: float = 5.0, rate: int = 16000, amplitude: float = 0.3, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.round(amplitude * 32767 * rng.uniform(-1, 1, int(round(seconds * rate)))).astype(np.int16)


def make_chirp(f0: float, f1: float, seconds: float = 5.0, rate: int = 16000, amplitude: float = 0.5) -> np.ndarray:
    t = np.arange(int(round(seconds * rate))) / rate
    phase = 2 * np.pi * (f0 * t + (f1 - f0) * t**2 / (2 * seconds))
    return np.round(amplitude * 32767 * np.sin(phase)).astype(np.int16)


@pytest.fixture
def catalog_file(tmp_path):
    def build(entries):
        path = tmp_path / "catalog.json"
        path.write_text(json.dumps(entries), encoding="utf-8")
        return path

    return build


def build_station_wavs(wav_dir: Path) -> dict:
    wav_dir.mkdir(parents=True, exist_ok=True)
    sounds = {
        "tone-low": make_sine(220, seconds=6.0),
        "tone-high": make_sine(2500, seconds=6.0),
        "noise": make_noise(seconds=6.0, seed=7),
        "chirp": make_chirp(300, 3000, seconds=6.0),
        "mixed": (0.5 * make_sine(440, seconds=6.0) + 0.5 * make_noise(seconds=6.0, seed=3)).astype(np.int16),
    }
    paths = {}
    for name, samples in sounds.items():
        path = wav_dir / f"{name}.wav"
        write_wav(path, samples, 16000)
        paths[name] = path
    return paths


@pytest.fixture
def fixture_wavs(tmp_path):
    """Five distinct synthetic station sounds on disk."""
    return build_station_wavs(tmp_path / "wavs")


@pytest.fixture(scope="session")
def trained_corpus():
    """Desk-profile training run on a 3-class synthetic spectrogram corpus.

    Classes are steady tones, uniform noise and frequency sweeps, 80
    snippets each, rendered through the real spectrogram front-end.
    """
    import time

    from stationprint.dsp import mel_spectrogram
    from stationprint.embed import DESK_PROFILE, train_autoencoder

    rng = np.random.default_rng(2024)
    sounds = []
    labels = []
    for _ in range(80):
        freq = float(np.exp(rng.uniform(np.log(200), np.log(4000))))
        sounds.append(make_sine(freq, amplitude=rng.uniform(0.3, 0.9)))
        labels.append("tone")
    for i in range(80):
        sounds.append(make_noise(amplitude=rng.uniform(0.2, 0.8), seed=int(rng.integers(1 << 31))))
        labels.append("noise")
    for _ in range(80):
        f0 = rng.uniform(150, 900)
        f1 = rng.uniform(2000, 6500)
        sounds.append(make_chirp(f0, f1, amplitude=rng.uniform(0.3, 0.9)))
        labels.append("chirp")

    spectrograms = np.stack(
        [mel_spectrogram(s.astype(np.float64)).values for s in sounds]
    ).astype(np.float32)
    started = time.monotonic()
    model = train_autoencoder(spectrograms, DESK_PROFILE)
    elapsed = time.monotonic() - started
    return model, spectrograms, np.array(labels), elapsed


@pytest.fixture(scope="session")
def pipeline_run(tmp_path_factory):
    """Full pipeline over 5 mock stations and one simulated hour.

    Shared session-wide: training dominates the cost, so everything that
    inspects the artifact chain reuses this one run. Returns the config,
    the run report and the wall time.
    """
    import time

    from stationprint.service.config import PipelineConfig
    from stationprint.service.mock_icy import MockIcyServer, StationFixture
    from stationprint.service.pipeline import fetch_mock_catalog, run_pipeline

    root = tmp_path_factory.mktemp("pipeline")
    wavs = build_station_wavs(root / "wavs")
    fixtures = [
        StationFixture("st-tone-low", "Tone Low", wavs["tone-low"],
                       genres=("Easy Listening",), metaint=16000, titles=("slow tune",)),
        StationFixture("st-tone-high", "Tone High", wavs["tone-high"],
                       genres=("Hit-Chart",), metaint=8000),
        StationFixture("st-noise", "Noise FM", wavs["noise"], genres=("Talk",)),
        StationFixture("st-chirp", "Chirp Radio", wavs["chirp"], genres=("Electronic",)),
        StationFixture("st-mixed", "Mixed Waves", wavs["mixed"], genres=()),
    ]
    config = PipelineConfig(
        catalog_path=root / "catalog.json",
        snippet_root=root / "snippets",
        spectrogram_archive=root / "spectrograms.spga",
        embedding_archive=root / "embeddings.emba",
        autoencoder_path=root / "autoencoder.spae",
        cluster_model_path=root / "clusters.spkm",
        fingerprint_store=root / "fingerprints.jsonl",
        analysis_dir=root / "analysis",
        report_path=root / "run_report.json",
        state_path=root / "pipeline_state.json",
        schedule_day="2020-03-15",
        schedule_hours="4:5",
        autoencoder_profile="desk",
        fingerprint_k_min=3,
        fingerprint_k_max=6,
        analyze_scree="2:4",
    )
    started = time.monotonic()
    with MockIcyServer(fixtures) as server:
        fetch_mock_catalog(server.address, config.catalog_path)
        report = run_pipeline(config)
    elapsed = time.monotonic() - started
    return config, report, elapsed
