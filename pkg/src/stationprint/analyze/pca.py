"""2-D principal-component projection of fingerprint vectors."""

from dataclasses import dataclass

import numpy as np

from stationprint.errors import DegenerateInputError


@dataclass(frozen=True)
class PcaProjection:
    mean: np.ndarray        # n
    components: np.ndarray  # 2 x n, orthonormal rows
    coords: np.ndarray      # stations x 2
    station_ids: tuple = ()

    def project(self, X) -> np.ndarray:
        """Map new fingerprint rows into the fitted 2-D plane."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return (X - self.mean) @ self.components.T


def pca_2d(X, station_ids=()) -> PcaProjection:
    """Top-2 principal directions of the centered rows of X.

    Sign convention: within each component the coordinate of largest
    magnitude is positive, which fixes the reflection ambiguity.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] < 3:
        raise DegenerateInputError("PCA needs at least 3 stations")
    mean = X.mean(axis=0)
    centered = X - mean
    if not centered.any():
        raise DegenerateInputError("zero-variance data")
    _, singular_values, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[:2].copy()
    if components.shape[0] < 2:
        raise DegenerateInputError("data has rank < 2")
    for row in components:
        anchor = int(np.abs(row).argmax())
        if row[anchor] < 0:
            row *= -1.0
    coords = centered @ components.T
    return PcaProjection(
        mean=mean,
        components=components,
        coords=coords,
        station_ids=tuple(station_ids),
    )
