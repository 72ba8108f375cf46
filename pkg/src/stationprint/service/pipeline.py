"""Batch pipeline: crawl -> spectrogram -> train/encode -> fingerprint -> analyze.

Each stage records a hash of its inputs; a rerun with unchanged inputs and
existing outputs is skipped, so the pipeline is resumable and idempotent.
All randomness is seeded through the config, making stage outputs
bit-identical across reruns.
"""

import hashlib
import json
import logging
import time
import urllib.request
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from stationprint.archive import (
    ArchiveWriter,
    EMBEDDING_MAGIC,
    SPECTROGRAM_MAGIC,
    load_archive,
    read_archive,
)
from stationprint.cluster import fit_kmeans, assign_batch, save_cluster_model, select_k
from stationprint.collector.audio import read_wav
from stationprint.collector.catalog import load_catalog
from stationprint.collector.recorder import crawl, load_manifests, summarize_dataset
from stationprint.dsp import SpectrogramParams, mel_spectrogram, resample_mono
from stationprint.embed import (
    DESK_MAX_SAMPLES,
    FULL_SCALE_REFERENCE_RMSE,
    PROFILES,
    load_model,
    save_model,
    train_autoencoder,
)
from stationprint.errors import StageError, StationprintError
from stationprint.fingerprint import (
    WHOLE_DAY,
    build_fingerprint,
    normalize_fingerprint,
    partition_assignments,
    write_fingerprint_store,
)
from stationprint.analyze import (
    archetypal_analysis,
    daytime_archetypes,
    daytime_trajectories,
    export_plot_data,
    pca_2d,
    rss_scree,
    select_archetype_count,
)
from stationprint.recommend import FingerprintStore
from stationprint.service.config import PipelineConfig

log = logging.getLogger(__name__)

STAGES = ("crawl", "spectrogram", "train", "encode", "fingerprint", "analyze")


def _hash_paths(paths, extra: str = "") -> str:
    digest = hashlib.sha256()
    digest.update(extra.encode("utf-8"))
    for path in paths:
        path = Path(path)
        digest.update(str(path).encode("utf-8"))
        if path.is_file():
            digest.update(path.read_bytes())
        elif path.is_dir():
            for child in sorted(path.rglob("*")):
                if child.is_file():
                    digest.update(str(child.relative_to(path)).encode("utf-8"))
                    digest.update(child.read_bytes())
    return digest.hexdigest()


class _StageRunner:
    def __init__(self, state_path: Path):
        self.state_path = Path(state_path)
        self.state = {}
        if self.state_path.exists():
            self.state = json.loads(self.state_path.read_text())
        self.report = {}

    def run(self, name, inputs, outputs, params, fn):
        input_hash = _hash_paths(inputs, extra=json.dumps(params, sort_keys=True, default=str))
        entry = self.state.get(name)
        outputs = [Path(p) for p in outputs]
        if entry and entry.get("input_hash") == input_hash and all(p.exists() for p in outputs):
            log.info("stage %s: inputs unchanged, skipped", name)
            self.report[name] = {"skipped": True}
            return
        started = time.monotonic()
        try:
            details = fn() or {}
        except StationprintError as exc:
            raise StageError(name, str(exc)) from exc
        except Exception as exc:
            raise StageError(name, f"{type(exc).__name__}: {exc}") from exc
        self.state[name] = {"input_hash": input_hash, "outputs": [str(p) for p in outputs]}
        self.state_path.parent.mkdir(parents=True, exist_ok=True)
        self.state_path.write_text(json.dumps(self.state, indent=2))
        self.report[name] = {"skipped": False, "seconds": round(time.monotonic() - started, 3), **details}


def fetch_mock_catalog(mock_server: str, target: Path) -> Path:
    """Download `GET /services` from a mock server into a catalog file."""
    url = f"http://{mock_server}/services"
    with urllib.request.urlopen(url, timeout=10) as response:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(response.read())
    return target


def model_version_of(autoencoder_id: str, cluster_model, params: dict) -> str:
    digest = hashlib.sha256()
    digest.update(autoencoder_id.encode("utf-8"))
    digest.update(np.ascontiguousarray(cluster_model.centroids, dtype="<f8").tobytes())
    digest.update(json.dumps(params, sort_keys=True).encode("utf-8"))
    return digest.hexdigest()[:16]


def spectrogram_params(config: PipelineConfig) -> SpectrogramParams:
    return SpectrogramParams(
        n_mels=config.spectrogram_n_mels,
        window_s=config.spectrogram_window_s,
        hop_s=config.spectrogram_hop_s,
        clip_db=config.spectrogram_clip_db,
        target_rate=config.spectrogram_target_rate,
    )


def run_crawl(config: PipelineConfig):
    catalog = load_catalog(config.catalog_path)
    manifests = crawl(
        catalog, config.snippet_root, config.day(), hours=config.hours(), simulated=True
    )
    summary = summarize_dataset(manifests)
    return {"dataset": summary.to_json()}


def run_spectrograms(config: PipelineConfig):
    params = spectrogram_params(config)
    count = 0
    with ArchiveWriter(config.spectrogram_archive, SPECTROGRAM_MAGIC) as writer:
        for manifest_path in sorted(Path(config.snippet_root).glob("*/*/manifest.json")):
            day_dir = manifest_path.parent
            for wav_path in sorted(day_dir.glob("*.wav")):
                samples, rate = read_wav(wav_path)
                pcm = resample_mono(samples.astype(np.float64), rate, params.target_rate)
                spec = mel_spectrogram(pcm, params)
                station_id = day_dir.parent.name
                stamp = datetime.strptime(
                    f"{day_dir.name} {wav_path.stem}", "%Y-%m-%d %H%M"
                ).replace(tzinfo=timezone.utc)
                writer.append(station_id, stamp, spec.values, meta=params.to_json())
                count += 1
    return {"snippets": count}


def run_train(config: PipelineConfig):
    from dataclasses import replace

    profile = PROFILES[config.autoencoder_profile]
    profile = replace(profile, seed=config.autoencoder_seed)
    if config.autoencoder_epochs:
        profile = replace(profile, epochs=config.autoencoder_epochs)
    max_samples = config.autoencoder_max_samples or (
        DESK_MAX_SAMPLES if config.autoencoder_profile == "desk" else 0
    )
    records = load_archive(config.spectrogram_archive, SPECTROGRAM_MAGIC)
    records.sort(key=lambda r: (r.station_id, r.timestamp))
    if max_samples and len(records) > max_samples:
        keep = np.linspace(0, len(records) - 1, max_samples).astype(int)
        records = [records[i] for i in keep]
    data = np.stack([r.values for r in records])
    model = train_autoencoder(data, profile)
    save_model(model, config.autoencoder_path)
    return {
        "samples": len(records),
        "epochs": profile.epochs,
        "final_rmse": model.training_history[-1],
        "full_scale_reference_rmse": FULL_SCALE_REFERENCE_RMSE,
    }


def run_encode(config: PipelineConfig, batch_size: int = 64):
    model = load_model(config.autoencoder_path)
    model_id = hashlib.sha256(Path(config.autoencoder_path).read_bytes()).hexdigest()[:16]
    records = load_archive(config.spectrogram_archive, SPECTROGRAM_MAGIC)
    count = 0
    with ArchiveWriter(config.embedding_archive, EMBEDDING_MAGIC) as writer:
        for start in range(0, len(records), batch_size):
            chunk = records[start:start + batch_size]
            vectors = model.encode_batch(np.stack([r.values for r in chunk]))
            for record, vector in zip(chunk, vectors):
                writer.append(
                    record.station_id, record.timestamp, vector, meta={"model_id": model_id}
                )
                count += 1
    return {"embeddings": count, "model_id": model_id}


def run_fingerprint(config: PipelineConfig):
    records = load_archive(config.embedding_archive, EMBEDDING_MAGIC)
    if not records:
        raise StationprintError("embedding archive is empty")
    model_ids = {r.meta.get("model_id", "") for r in records}
    if len(model_ids) != 1:
        raise StationprintError(f"embedding archive mixes encoder models: {sorted(model_ids)}")
    records.sort(key=lambda r: (r.station_id, r.timestamp))

    X = np.stack([r.values.astype(np.float64) for r in records])
    ids = [f"{r.station_id}/{r.timestamp.isoformat()}" for r in records]
    if config.fingerprint_k_min == config.fingerprint_k_max:
        best_k = config.fingerprint_k_min
        scores = {}
    else:
        best_k, scores = select_k(
            X, config.fingerprint_k_min, config.fingerprint_k_max,
            seed=config.fingerprint_seed, ids=ids,
        )
    cluster_model, _ = fit_kmeans(X, best_k, seed=config.fingerprint_seed)
    save_cluster_model(cluster_model, config.cluster_model_path)

    params = {
        "k_range": [config.fingerprint_k_min, config.fingerprint_k_max],
        "seed": config.fingerprint_seed,
        "timezone": config.schedule_timezone,
    }
    version = model_version_of(next(iter(model_ids)), cluster_model, params)

    tz = config.timezone()
    manifests = load_manifests(config.snippet_root)
    complete = {m.station_id for m in manifests if m.complete}
    if not manifests:
        # no recording manifests available (archive produced elsewhere):
        # fingerprint every station rather than none
        complete = {r.station_id for r in records}
    fingerprints = []
    by_station = {}
    for record in records:
        by_station.setdefault(record.station_id, []).append(record)
    skipped = 0
    for station_id in sorted(by_station):
        if station_id not in complete:
            skipped += 1
            continue
        station_records = by_station[station_id]
        assignments = assign_batch(cluster_model, np.stack([r.values for r in station_records]))
        fingerprints.append(build_fingerprint(assignments, best_k, station_id, WHOLE_DAY))
        local_times = [r.timestamp.astimezone(tz) for r in station_records]
        for partition, indices in partition_assignments(local_times).items():
            if not indices:
                log.warning("%s: no snippets in %s partition", station_id, partition)
                continue
            fingerprints.append(
                normalize_fingerprint(
                    build_fingerprint(assignments[indices], best_k, station_id, partition)
                )
            )
    write_fingerprint_store(fingerprints, config.fingerprint_store, version)
    return {
        "clusters": best_k,
        "silhouette_scores": {str(k): v for k, v in scores.items()},
        "stations": len(by_station) - skipped,
        "incomplete_stations_skipped": skipped,
        "model_version": version,
    }


def run_analyze(config: PipelineConfig):
    # genre labels are optional decoration; analysis runs without a catalog
    has_catalog = config.catalog_path is not None and Path(config.catalog_path).exists()
    catalog = load_catalog(config.catalog_path) if has_catalog else None
    store = FingerprintStore.from_file(config.fingerprint_store, catalog=catalog)
    ids = store.station_ids(WHOLE_DAY)
    if len(ids) < 3:
        raise StationprintError(f"analysis needs >= 3 stations, have {len(ids)}")
    # normalized to mass 576 so windowed desk runs share the full-day scale
    X = np.stack([normalize_fingerprint(store.get(s)).histogram for s in ids])

    scree = []
    if config.analyze_archetypes:
        k = config.analyze_archetypes
    else:
        k_range = [k for k in config.scree_range() if 2 <= k < len(ids)]
        if len(k_range) < 3:
            k = min(max(2, len(ids) - 1), 4)
        else:
            scree = rss_scree(X, k_range, seed=config.analyze_seed)
            k = select_archetype_count(scree)
    model = archetypal_analysis(X, k, seed=config.analyze_seed)
    projection = pca_2d(X, station_ids=ids)

    models = {WHOLE_DAY: model}
    trajectories = {}
    if config.analyze_daytime:
        trajectories = daytime_trajectories(store, projection)
        for partition, info in daytime_archetypes(store, k=k, seed=config.analyze_seed).items():
            models[partition] = info["model"]
    export_plot_data(
        projection, models, config.analysis_dir,
        scree=scree, trajectories=trajectories, genres=store.genres,
    )
    return {"archetypes": k, "stations": len(ids), "scree": [[k_, r] for k_, r in scree]}


def run_pipeline(config: PipelineConfig) -> dict:
    """Execute all stages in order; returns the run report."""
    config.validate()
    runner = _StageRunner(config.state_path)
    spec_params = spectrogram_params(config).to_json()

    runner.run(
        "crawl",
        inputs=[config.catalog_path],
        outputs=[config.snippet_root],
        params={"day": config.schedule_day, "hours": config.schedule_hours},
        fn=lambda: run_crawl(config),
    )
    runner.run(
        "spectrogram",
        inputs=[config.snippet_root],
        outputs=[config.spectrogram_archive],
        params=spec_params,
        fn=lambda: run_spectrograms(config),
    )
    runner.run(
        "train",
        inputs=[config.spectrogram_archive],
        outputs=[config.autoencoder_path],
        params={
            "profile": config.autoencoder_profile,
            "seed": config.autoencoder_seed,
            "epochs": config.autoencoder_epochs,
            "max_samples": config.autoencoder_max_samples,
        },
        fn=lambda: run_train(config),
    )
    runner.run(
        "encode",
        inputs=[config.spectrogram_archive, config.autoencoder_path],
        outputs=[config.embedding_archive],
        params={},
        fn=lambda: run_encode(config),
    )
    runner.run(
        "fingerprint",
        inputs=[config.embedding_archive, config.snippet_root],
        outputs=[config.fingerprint_store, config.cluster_model_path],
        params={
            "k_min": config.fingerprint_k_min,
            "k_max": config.fingerprint_k_max,
            "seed": config.fingerprint_seed,
            "timezone": config.schedule_timezone,
        },
        fn=lambda: run_fingerprint(config),
    )
    runner.run(
        "analyze",
        inputs=[config.fingerprint_store, config.catalog_path],
        outputs=[config.analysis_dir],
        params={
            "archetypes": config.analyze_archetypes,
            "scree": config.analyze_scree,
            "seed": config.analyze_seed,
            "daytime": config.analyze_daytime,
        },
        fn=lambda: run_analyze(config),
    )

    manifests = load_manifests(config.snippet_root)
    report = {
        "dataset": summarize_dataset(manifests).to_json(),
        "stages": runner.report,
    }
    config.report_path.parent.mkdir(parents=True, exist_ok=True)
    config.report_path.write_text(json.dumps(report, indent=2))
    return report
