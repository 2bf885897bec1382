"""Synthetic cloud generation for desk-scale training runs."""

from __future__ import annotations

import numpy as np

from .errors import ArgumentError

BLOBS_PER_CLOUD = 4
BLOB_SPREAD = 0.15


def synthetic_clouds(count: int, n_points: int, seed: int) -> list[np.ndarray]:
    """Sample structured random clouds: Gaussian blobs around anchors.

    Each cloud draws ``BLOBS_PER_CLOUD`` anchor points uniformly in
    ``[-1, 1]^3`` and scatters points around them, giving shapes with
    enough regularity to overfit quickly at desk scale.

    Returns
    -------
    list of numpy.ndarray
        ``count`` arrays of shape ``(n_points, 3)``, dtype float64.
    """
    if count < 1:
        raise ArgumentError(f"cloud count must be >= 1, got {count}")
    if n_points < 1:
        raise ArgumentError(f"point count must be >= 1, got {n_points}")
    rng = np.random.default_rng(seed)
    clouds = []
    for _ in range(count):
        anchors = rng.uniform(-1.0, 1.0, size=(BLOBS_PER_CLOUD, 3))
        members = rng.integers(0, BLOBS_PER_CLOUD, size=n_points)
        offsets = rng.normal(0.0, BLOB_SPREAD, size=(n_points, 3))
        clouds.append(anchors[members] + offsets)
    return clouds
