"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines; every tolerance is asserted exactly as specified.
"""

import itertools
import json
import math
import string
import time
from datetime import date, datetime, timedelta, timezone

import numpy as np
import pytest
from fastapi.testclient import TestClient

from stationprint.analyze.archetypes import (
    archetypal_analysis,
    rss_scree,
    select_archetype_count,
)
from stationprint.cluster import fit_kmeans, select_k
from stationprint.collector.icy import IcyDemuxer, encode_metadata_block
from stationprint.collector.recorder import RecordingManifest, summarize_dataset
from stationprint.collector.schedule import SNIPPET_SECONDS, build_schedule
from stationprint.dsp import mel_center_frequencies, mel_spectrogram
from stationprint.embed import AutoencoderConfig, Autoencoder, gradient_check, train_autoencoder
from stationprint.fingerprint import (
    DAY,
    MORNING,
    NIGHT,
    TARGET_MASS,
    WHOLE_DAY,
    build_fingerprint,
    normalize_fingerprint,
    partition_assignments,
)
from stationprint.recommend import FingerprintStore, distance, nearest_k, within_radius
from stationprint.fingerprint import Fingerprint
from stationprint.service.api import create_app
from tests.conftest import make_sine


def ok(number, name):
    print(f"ACCEPTANCE {number:02d} {name}: PASS")


def test_c01_schedule_fidelity():
    started = time.monotonic()
    slots = build_schedule(date(2020, 3, 15))
    elapsed = time.monotonic() - started
    assert len(slots) == 576
    per_hour = {}
    for slot in slots:
        per_hour[slot.hour] = per_hour.get(slot.hour, 0) + 1
        for instant in (slot, slot + timedelta(seconds=SNIPPET_SECONDS - 1e-9)):
            assert not (instant.minute >= 55 or instant.minute < 5)
    assert per_hour == {h: 24 for h in range(24)}
    assert elapsed < 1.0
    ok(1, "schedule fidelity")


def test_c02_accounting_identity():
    base = datetime(2020, 3, 15, tzinfo=timezone.utc)
    manifests = [
        RecordingManifest("c%03d" % i, date(2020, 3, 15), 576, 576, [])
        for i in range(431)
    ]
    counts = [17_983 // 30] * 30
    counts[-1] += 17_983 - sum(counts)
    for j, count in enumerate(counts):
        missing = [base + timedelta(minutes=m) for m in range(576 - count)]
        manifests.append(
            RecordingManifest("i%03d" % j, date(2020, 3, 15), 576, count, missing)
        )
    summary = summarize_dataset(manifests)
    assert summary.total_snippets == 266_239
    assert summary.complete_count == 431
    assert summary.incomplete_count == 30
    assert summary.incomplete_snippets == 17_983
    assert summary.total_snippets == 431 * 576 + 17_983
    ok(2, "accounting identity 266,239 = 431*576 + 17,983")


def test_c03_icy_demux_randomized():
    rng = np.random.default_rng(7)
    alphabet = np.frombuffer(
        (string.ascii_letters + string.digits + " -_.").encode(), dtype=np.uint8
    )

    def title_for_level(level):
        if level == 0:
            return None
        max_len = 16 * level - 15
        min_len = max(1, max_len - 15)
        length = int(rng.integers(min_len, max_len + 1))
        return bytes(rng.choice(alphabet, size=length)).decode()

    mismatches = 0
    for _ in range(1000):
        metaint = int(np.exp(rng.uniform(0, np.log(65536))))
        blocks = int(rng.integers(0, 5))
        tail = int(rng.integers(0, min(metaint, 2000) + 1))
        audio = rng.integers(0, 256, size=metaint * blocks + tail, dtype=np.uint8).tobytes()
        levels = [int(rng.integers(0, 256)) for _ in range(blocks)]
        titles = [title_for_level(lv) for lv in levels]

        stream = bytearray()
        pos = 0
        for title in titles:
            stream += audio[pos:pos + metaint]
            pos += metaint
            block = encode_metadata_block(title)
            if title is not None:
                assert block[0] == math.ceil((len(title) + 15) / 16)
            stream += block
        stream += audio[pos:]

        demuxer = IcyDemuxer(metaint)
        out = bytearray()
        cursor = 0
        while cursor < len(stream):
            step = int(rng.integers(1, 65536))
            out += demuxer.feed(bytes(stream[cursor:cursor + step]))
            cursor += step
        demuxer.finish()
        expected_titles = [t for t in titles if t is not None]
        if bytes(out) != audio or [e.title for e in demuxer.events] != expected_titles:
            mismatches += 1
    assert mismatches == 0
    ok(3, "ICY demux bit-exact on 1,000 randomized fixtures")


def test_c04_spectrogram_contract():
    spec = mel_spectrogram(make_sine(440).astype(np.float64))
    assert spec.values.shape == (124, 128)

    centers = mel_center_frequencies(128, 16000)
    for freq in np.linspace(100, 7000, 20):
        values = mel_spectrogram(make_sine(float(freq)).astype(np.float64)).values
        predicted = int(np.argmin(np.abs(centers - freq)))
        assert abs(int(values.mean(axis=0).argmax()) - predicted) <= 1

    pcm = make_sine(1234.5).astype(np.float64)
    base = mel_spectrogram(pcm).values
    for scale in (1e-3, 0.1, 42.0):
        np.testing.assert_allclose(mel_spectrogram(scale * pcm).values, base, atol=1e-6)
    ok(4, "spectrogram 124x128, tone localization, amplitude invariance")


def test_c05_autoencoder_math(trained_corpus):
    tiny = AutoencoderConfig(
        num_layers=1, units=4, bidirectional_encoder=True, dropout=0.0, seed=3
    )
    model = Autoencoder(tiny, input_shape=(3, 4), dtype=np.float64)
    sample = np.random.default_rng(5).uniform(-1, 1, size=(2, 3, 4))
    err = gradient_check(model, sample, epsilon=1e-5, n_coords=250)
    assert err < 1e-4

    repro_config = AutoencoderConfig(
        num_layers=1, units=5, bidirectional_encoder=True, dropout=0.2,
        learning_rate=0.005, batch_size=8, epochs=3, seed=17,
    )
    data = np.random.default_rng(1).uniform(-1, 1, size=(24, 4, 6))
    run1 = train_autoencoder(data.copy(), repro_config)
    run2 = train_autoencoder(data.copy(), repro_config)
    assert run1.training_history == run2.training_history
    for key in run1.params:
        np.testing.assert_array_equal(run1.params[key], run2.params[key])

    model, spectrograms, labels, elapsed = trained_corpus
    assert elapsed < 1800  # < 30 min
    embeddings = []
    for start in range(0, len(spectrograms), 64):
        embeddings.append(model.encode_batch(spectrograms[start:start + 64]))
    embeddings = np.concatenate(embeddings)
    intra, inter = [], []
    for i in range(len(embeddings)):
        for j in range(i + 1, len(embeddings)):
            d = float(np.linalg.norm(embeddings[i] - embeddings[j]))
            (intra if labels[i] == labels[j] else inter).append(d)
    assert np.mean(intra) < np.mean(inter)
    ok(5, "autoencoder gradients, reproducibility, class separation "
          f"(intra {np.mean(intra):.2f} < inter {np.mean(inter):.2f}, "
          f"train {elapsed:.0f}s)")


def exhaustive_inertia(points, n):
    best = np.inf
    for labels in itertools.product(range(n), repeat=len(points)):
        if len(set(labels)) < n:
            continue
        arr = np.array(labels)
        total = 0.0
        for c in range(n):
            members = points[arr == c]
            total += ((members - members.mean(axis=0)) ** 2).sum()
        best = min(best, total)
    return best


def test_c06_kmeans_and_silhouette():
    rng = np.random.default_rng(0)
    for n_points, k in ((6, 2), (7, 2), (8, 3)):
        points = rng.uniform(0, 10, size=(n_points, 2))
        model, _ = fit_kmeans(points, k, seed=1)
        assert model.inertia == pytest.approx(exhaustive_inertia(points, k), abs=1e-9)

    hits = 0
    for seed in range(10):
        gen = np.random.default_rng(1000 + seed)
        centers = gen.uniform(-10, 10, size=(11, 16))
        points = np.concatenate(
            [c + 0.05 * gen.normal(size=(40, 16)) for c in centers]
        )
        best, _ = select_k(points, 9, 16, seed=seed)
        hits += best == 11
    assert hits >= 9
    ok(6, f"k-means exhaustive optimum, planted 11 recovered {hits}/10 over 9..16")


def test_c07_fingerprint_masses():
    rng = np.random.default_rng(3)
    for _ in range(50):
        n = int(rng.integers(2, 16))
        count = int(rng.integers(1, 600))
        assignments = rng.integers(0, n, size=count)
        fp = build_fingerprint(assignments, n, "s")
        assert fp.histogram.sum() == count  # exact mass conservation
        normalized = normalize_fingerprint(fp)
        assert abs(normalized.histogram.sum() - TARGET_MASS) < 1e-9

    slots = build_schedule(date(2020, 3, 15))
    parts = partition_assignments(slots)
    assert (len(parts[NIGHT]), len(parts[MORNING]), len(parts[DAY])) == (192, 96, 288)
    ok(7, "fingerprint mass conservation, partitions 192/96/288, normalization 1e-9")


def synthetic_generator_store(n_generators, per_generator, n=11, seed=0, noise=2.0):
    rng = np.random.default_rng(seed)
    store = FingerprintStore(model_version="synthetic")
    labels = {}
    for g in range(n_generators):
        prototype = rng.dirichlet(np.ones(n)) * TARGET_MASS
        for i in range(per_generator):
            histogram = np.maximum(prototype + noise * rng.normal(size=n), 0.0)
            histogram *= TARGET_MASS / histogram.sum()
            sid = f"g{g:02d}-s{i}"
            store.add(Fingerprint(sid, WHOLE_DAY, histogram, TARGET_MASS))
            labels[sid] = g
    return store, labels


def test_c08_recommender_properties():
    store, labels = synthetic_generator_store(10, 5)
    ids = store.station_ids()
    fps = {i: store.get(i) for i in ids}

    rng = np.random.default_rng(1)
    for _ in range(10_000):
        a, b, c = (fps[ids[j]] for j in rng.integers(0, len(ids), size=3))
        dab, dbc, dac = distance(a, b), distance(b, c), distance(a, c)
        assert dab >= 0 and dab == distance(b, a)
        assert dac <= dab + dbc + 1e-9

    for sid in ids:  # 50 stations, exhaustive prefix + radius monotonicity
        full = nearest_k(store, sid, len(ids) - 1)
        for k in range(1, len(ids)):
            assert nearest_k(store, sid, k) == full[:k]
        radii = [0.0] + [r.distance for r in full] + [math.inf]
        previous = set()
        for radius in radii:
            current = {r.station_id for r in within_radius(store, sid, radius)}
            assert previous <= current
            previous = current

    hits = sum(
        labels[nearest_k(store, sid, 1)[0].station_id] == labels[sid] for sid in ids
    )
    assert hits >= 0.9 * len(ids)
    ok(8, f"recommender metric/prefix/radius properties, top-1 generator match {hits}/{len(ids)}")


def planted_hull(seed, n=500, dim=11, scale=40.0):
    rng = np.random.default_rng(seed)
    basis = np.linalg.qr(rng.normal(size=(dim, 4)))[0].T
    vertices = scale * basis + rng.normal(scale=2.0, size=dim)
    weights = rng.dirichlet(np.ones(4), size=n - 4)
    return np.vstack([vertices, weights @ vertices]), vertices


def test_c09_archetypal_analysis():
    X, vertices = planted_hull(0)
    started = time.monotonic()
    scree = rss_scree(X, range(2, 9), seed=0)
    model = archetypal_analysis(X, 4, seed=0)
    elapsed = time.monotonic() - started
    assert elapsed < 60.0  # full scree + fit at 500 x 11

    for v in vertices:
        assert np.linalg.norm(model.archetypes - v, axis=1).min() < 1e-3
    rss2 = scree[0][1]
    for (_, a), (_, b) in zip(scree, scree[1:]):
        assert b <= a + 1e-6 * rss2  # non-increasing per k
    # (per-iteration monotonicity is asserted inside the solver itself)

    hits = 0
    for seed in range(10):
        Xs, _ = planted_hull(seed)
        hits += select_archetype_count(rss_scree(Xs, range(2, 9), seed=seed)) == 4
    assert hits >= 9
    ok(9, f"archetypes recovered to 1e-3, elbow k=4 in {hits}/10 seeds, "
          f"scree+fit {elapsed:.1f}s < 60s")


def test_c10_daytime_bounds():
    rng = np.random.default_rng(11)
    q = np.array([0.35, 0.3, 0.2, 0.15])
    q_shift = np.array([0.02, 0.08, 0.2, 0.7])
    sizes = {NIGHT: 192, MORNING: 96, DAY: 288}

    def partition_fp(partition, dist, size):
        assignments = rng.choice(4, p=dist, size=size)
        return normalize_fingerprint(build_fingerprint(assignments, 4, "s", partition))

    # precomputed sampling-noise bound: 4 sigma of the normalized difference
    def bound(m1, m2):
        return 4.0 * np.sqrt(
            TARGET_MASS**2 * float((q * (1 - q)).sum()) * (1 / m1 + 1 / m2)
        )

    stationary = {p: partition_fp(p, q, s) for p, s in sizes.items()}
    for p1, p2 in itertools.combinations(sizes, 2):
        assert distance(stationary[p1], stationary[p2]) < bound(sizes[p1], sizes[p2])

    shifted = dict(stationary)
    shifted[MORNING] = partition_fp(MORNING, q_shift, sizes[MORNING])
    assert distance(shifted[MORNING], shifted[NIGHT]) > bound(sizes[MORNING], sizes[NIGHT])
    assert distance(shifted[MORNING], shifted[DAY]) > bound(sizes[MORNING], sizes[DAY])
    ok(10, "stationary partitions within noise bound, planted morning shift beyond it")


def test_c11_end_to_end_smoke(pipeline_run):
    config, report, elapsed = pipeline_run
    assert elapsed < 600.0  # < 10 min wall time
    assert all(not stage["skipped"] for stage in report["stages"].values())
    assert report["dataset"]["complete_count"] == 5

    client = TestClient(
        create_app(config.fingerprint_store, config.catalog_path, config.analysis_dir)
    )
    first = client.get("/stations/st-noise/recommendations?k=3")
    second = client.get("/stations/st-noise/recommendations?k=3")
    assert first.status_code == 200
    payload = first.json()
    assert len(payload) == 3
    assert [r["distance"] for r in payload] == sorted(r["distance"] for r in payload)
    assert first.content == second.content  # deterministic bytes
    ok(11, f"end-to-end smoke on 5 mock stations in {elapsed:.0f}s, "
           "k=3 recommendations deterministic")
