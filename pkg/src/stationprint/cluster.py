"""K-means over embeddings, with silhouette-based selection of the cluster count.

fit_kmeans: distance-weighted ("careful") seeding, Lloyd iterations to an
assignment fixpoint, best of 10 restarts by inertia, deterministic per seed.
select_k sweeps a k-range (default 9..16) and picks the silhouette peak,
ties toward smaller k.
"""

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from stationprint.errors import DegenerateInputError, ShapeError

MAX_LLOYD_ITERATIONS = 300
RESTARTS = 10
SILHOUETTE_SAMPLE_CAP = 10_000
DEFAULT_K_MIN = 9
DEFAULT_K_MAX = 16


@dataclass(frozen=True)
class ClusterModel:
    centroids: np.ndarray  # n x dim
    inertia: float
    seed: int

    @property
    def n(self) -> int:
        return self.centroids.shape[0]


def _pairwise_sq(points, centroids):
    # |p - c|^2 = |p|^2 - 2 p.c + |c|^2 ; clamp tiny negatives from cancellation
    sq = (
        np.einsum("ij,ij->i", points, points)[:, None]
        - 2.0 * points @ centroids.T
        + np.einsum("ij,ij->i", centroids, centroids)[None, :]
    )
    return np.maximum(sq, 0.0)


def assign(model: ClusterModel, embedding: np.ndarray) -> int:
    """Index of the nearest centroid; ties resolve to the lowest index."""
    embedding = np.asarray(embedding, dtype=np.float64)
    if embedding.shape != (model.centroids.shape[1],):
        raise ShapeError(
            f"embedding of dim {embedding.shape} does not match centroids "
            f"of dim {model.centroids.shape[1]}"
        )
    distances = np.linalg.norm(model.centroids - embedding, axis=1)
    return int(distances.argmin())


def assign_batch(model: ClusterModel, embeddings: np.ndarray) -> np.ndarray:
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if embeddings.shape[1] != model.centroids.shape[1]:
        raise ShapeError("embedding dimension mismatch")
    return _pairwise_sq(embeddings, model.centroids).argmin(axis=1)


def _careful_seed(points, n, rng):
    """Distance-weighted initial centroids (k-means++ style sampling)."""
    first = int(rng.integers(len(points)))
    centroids = [points[first]]
    d2 = np.einsum("ij,ij->i", points - centroids[0], points - centroids[0])
    for _ in range(1, n):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(len(points)))  # all remaining mass at chosen points
        else:
            idx = int(rng.choice(len(points), p=d2 / total))
        centroids.append(points[idx])
        d2 = np.minimum(d2, np.einsum("ij,ij->i", points - centroids[-1], points - centroids[-1]))
    return np.stack(centroids)


def _lloyd(points, centroids):
    labels = None
    inertia = np.inf
    for _ in range(MAX_LLOYD_ITERATIONS):
        sq = _pairwise_sq(points, centroids)
        new_labels = sq.argmin(axis=1)
        new_inertia = float(sq[np.arange(len(points)), new_labels].sum())
        assert new_inertia <= inertia + 1e-9 * max(1.0, inertia), "inertia must not increase"
        if labels is not None and np.array_equal(new_labels, labels):
            return centroids, new_labels, new_inertia
        labels, inertia = new_labels, new_inertia
        centroids = centroids.copy()
        for c in range(centroids.shape[0]):
            members = points[labels == c]
            if len(members):
                centroids[c] = members.mean(axis=0)
            else:
                # re-seat an empty cluster at the worst-fit point
                farthest = sq[np.arange(len(points)), labels].argmax()
                centroids[c] = points[farthest]
    return centroids, labels, inertia


def fit_kmeans(embeddings, n: int, seed: int = 0) -> tuple:
    """Cluster embeddings into n groups; returns (model, labels).

    Requires at least n distinct points; best of 10 restarts by inertia.
    """
    points = np.asarray(embeddings, dtype=np.float64)
    if points.ndim != 2:
        raise ShapeError("embeddings must be a 2-D array")
    if n < 2:
        raise DegenerateInputError("need n >= 2 clusters")
    if len(np.unique(points, axis=0)) < n:
        raise DegenerateInputError(f"fewer than {n} distinct points")

    rng = np.random.default_rng(seed)
    best = None
    for _ in range(RESTARTS):
        centroids = _careful_seed(points, n, rng)
        centroids, labels, inertia = _lloyd(points, centroids)
        if best is None or inertia < best[2]:
            best = (centroids, labels, inertia)
    centroids, labels, inertia = best
    return ClusterModel(centroids=centroids, inertia=inertia, seed=seed), labels


def silhouette(points, labels, sample_cap: int = SILHOUETTE_SAMPLE_CAP, seed: int = 0) -> float:
    """Mean of (b - a) / max(a, b); singleton clusters contribute 0.

    Larger-than-cap inputs are subsampled uniformly with the fixed seed and
    the coefficient is computed within the subsample.
    """
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels)
    if len(set(labels.tolist())) < 2:
        raise DegenerateInputError("silhouette needs at least 2 clusters")
    if len(points) > sample_cap:
        keep = np.sort(np.random.default_rng(seed).choice(len(points), sample_cap, replace=False))
        points, labels = points[keep], labels[keep]

    unique = np.unique(labels)
    cluster_sizes = {c: int((labels == c).sum()) for c in unique}
    scores = np.zeros(len(points))
    # accumulate per-cluster distance sums in row blocks to bound memory
    block = max(1, int(2e7) // max(1, len(points)))
    for start in range(0, len(points), block):
        rows = slice(start, min(start + block, len(points)))
        d = np.sqrt(_pairwise_sq(points[rows], points))
        sums = np.stack([d[:, labels == c].sum(axis=1) for c in unique], axis=1)
        for i, row_label in enumerate(labels[rows]):
            own = cluster_sizes[row_label]
            col = int(np.searchsorted(unique, row_label))
            if own <= 1:
                scores[start + i] = 0.0
                continue
            a = sums[i, col] / (own - 1)
            b = min(
                sums[i, j] / cluster_sizes[c]
                for j, c in enumerate(unique)
                if c != row_label
            )
            denom = max(a, b)
            scores[start + i] = 0.0 if denom == 0 else (b - a) / denom
    return float(scores.mean())


def select_k(embeddings, k_min: int = DEFAULT_K_MIN, k_max: int = DEFAULT_K_MAX,
             seed: int = 0, ids=None) -> tuple:
    """Silhouette-best cluster count over [k_min, k_max]; ties toward smaller k.

    Input order must not matter: rows are put into a canonical order (by the
    snippet ids when given, else lexicographically) before any seeded step.
    """
    points = np.asarray(embeddings, dtype=np.float64)
    if ids is not None:
        order = np.argsort(np.asarray(ids), kind="stable")
    else:
        order = np.lexsort(points.T[::-1])
    points = points[order]

    scores = {}
    for k in range(k_min, k_max + 1):
        _, labels = fit_kmeans(points, k, seed)
        scores[k] = silhouette(points, labels, seed=seed)
    best = max(sorted(scores), key=lambda k: (scores[k], -k))
    return best, scores


CLUSTER_MAGIC = b"SPKM"
CLUSTER_VERSION = 1


def save_cluster_model(model: ClusterModel, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = json.dumps({"inertia": model.inertia, "seed": model.seed}).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CLUSTER_MAGIC + struct.pack("<I", CLUSTER_VERSION))
        fh.write(struct.pack("<I", len(header)) + header)
        fh.write(struct.pack("<II", *model.centroids.shape))
        fh.write(np.ascontiguousarray(model.centroids, dtype="<f8").tobytes())


def load_cluster_model(path) -> ClusterModel:
    data = Path(path).read_bytes()
    if data[:4] != CLUSTER_MAGIC:
        raise ValueError(f"{path}: not a cluster model file")
    (header_len,) = struct.unpack("<I", data[8:12])
    header = json.loads(data[12:12 + header_len])
    pos = 12 + header_len
    n, dim = struct.unpack("<II", data[pos:pos + 8])
    pos += 8
    centroids = np.frombuffer(data[pos:pos + 8 * n * dim], dtype="<f8").reshape(n, dim).copy()
    return ClusterModel(centroids=centroids, inertia=header["inertia"], seed=header["seed"])
