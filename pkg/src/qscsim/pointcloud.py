"""Point-cloud representation, file I/O, kNN graph, and Chamfer distance."""

from __future__ import annotations

import os
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ArgumentError, PointCloudParseError, ValidationError

DEFAULT_POINT_COUNT = 2048


class CloudFormat(Enum):
    XYZ_TEXT = "xyz-text"
    F32_BINARY = "f32-binary"


@dataclass(frozen=True)
class PointCloud:
    """Ordered set of 3D points.

    Coordinates are held as float64 for accumulation accuracy; on-disk
    binary form is float32.
    """

    points: np.ndarray

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValidationError(f"points must be N x 3, got shape {pts.shape}")
        if pts.shape[0] < 1:
            raise ValidationError("point cloud must contain at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("point cloud contains non-finite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n_points(self) -> int:
        return int(self.points.shape[0])


@dataclass(frozen=True)
class KnnGraph:
    """Per-point neighbor lists, sorted by ascending distance then index."""

    adjacency: np.ndarray
    k: int

    def __post_init__(self) -> None:
        adj = np.asarray(self.adjacency, dtype=np.int64)
        if adj.ndim != 2 or adj.shape[1] != self.k:
            raise ValidationError(f"adjacency must be N x k, got shape {adj.shape}")
        adj.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)


def load_pointcloud(path: str | os.PathLike, fmt: CloudFormat) -> PointCloud:
    """Read a cloud from disk in the given format.

    Raises
    ------
    PointCloudParseError
        On malformed text lines (named by line number) or a binary payload
        whose size is not a multiple of 12 bytes (named by byte count).
    ValidationError
        On non-finite coordinates or an empty cloud.
    """
    if fmt is CloudFormat.XYZ_TEXT:
        rows = []
        with open(path, "r", encoding="ascii") as fh:
            for lineno, line in enumerate(fh, start=1):
                stripped = line.strip()
                if not stripped:
                    continue
                fields = stripped.split()
                if len(fields) != 3:
                    raise PointCloudParseError(
                        f"{path}: line {lineno}: expected 3 fields, got {len(fields)}"
                    )
                try:
                    rows.append([float(f) for f in fields])
                except ValueError as exc:
                    raise PointCloudParseError(
                        f"{path}: line {lineno}: {exc}"
                    ) from exc
        if not rows:
            raise PointCloudParseError(f"{path}: no points found")
        return PointCloud(np.array(rows, dtype=np.float64))

    if fmt is CloudFormat.F32_BINARY:
        with open(path, "rb") as fh:
            raw = fh.read()
        if len(raw) == 0:
            raise PointCloudParseError(f"{path}: no points found")
        if len(raw) % 12 != 0:
            raise PointCloudParseError(
                f"{path}: byte count {len(raw)} is not a multiple of 12"
            )
        flat = np.frombuffer(raw, dtype="<f4").astype(np.float64)
        return PointCloud(flat.reshape(-1, 3))

    raise ArgumentError(f"unknown cloud format: {fmt!r}")


def save_pointcloud(cloud: PointCloud, path: str | os.PathLike, fmt: CloudFormat) -> None:
    """Write a cloud to disk in the given format."""
    if fmt is CloudFormat.XYZ_TEXT:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            for x, y, z in cloud.points.tolist():
                fh.write(f"{x!r} {y!r} {z!r}\n")
        return
    if fmt is CloudFormat.F32_BINARY:
        with open(path, "wb") as fh:
            fh.write(cloud.points.astype("<f4").tobytes())
        return
    raise ArgumentError(f"unknown cloud format: {fmt!r}")


def knn_graph(cloud: PointCloud, k: int) -> KnnGraph:
    """Build the k-nearest-neighbor graph under squared Euclidean distance.

    Distance ties are broken by ascending point index so the result is
    deterministic.
    """
    n = cloud.n_points
    if k < 1:
        raise ArgumentError(f"k must be positive, got {k}")
    if k >= n:
        raise ArgumentError(f"k={k} requires at least {k + 1} points, cloud has {n}")
    pts = cloud.points
    adjacency = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        diff = pts - pts[i]
        d2 = np.einsum("ij,ij->i", diff, diff)
        d2[i] = np.inf
        # stable sort keeps ascending-index order among equal distances
        order = np.argsort(d2, kind="stable")
        adjacency[i] = order[:k]
    return KnnGraph(adjacency=adjacency, k=k)


def _directed_mean_min(a: np.ndarray, b: np.ndarray) -> float:
    """Mean over points of a of the min squared distance to points of b.

    Accumulation runs in ascending point order so the result is bitwise
    identical to a double loop.
    """
    mins = np.empty(a.shape[0], dtype=np.float64)
    chunk = 256
    for start in range(0, a.shape[0], chunk):
        block = a[start:start + chunk]
        diff = block[:, None, :] - b[None, :, :]
        d2 = diff[:, :, 0] * diff[:, :, 0]
        d2 += diff[:, :, 1] * diff[:, :, 1]
        d2 += diff[:, :, 2] * diff[:, :, 2]
        mins[start:start + chunk] = d2.min(axis=1)
    total = 0.0
    for value in mins.tolist():
        total += value
    return total / a.shape[0]


def chamfer_distance(p: PointCloud, q: PointCloud) -> float:
    """Bidirectional mean of squared nearest-neighbor distances."""
    a = p.points
    b = q.points
    return _directed_mean_min(a, b) + _directed_mean_min(b, a)
