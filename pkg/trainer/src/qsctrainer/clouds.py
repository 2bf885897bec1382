"""Point-cloud file I/O in the formats shared with the simulator package.

Two on-disk layouts are supported:

``xyz-text``
    ASCII, one point per line, three whitespace-separated reals.
``f32-binary``
    Raw little-endian 4-byte reals, three per point, no header.

This module intentionally re-implements the formats rather than importing
the simulator: the only coupling between the two packages is the bytes on
disk.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .errors import ArgumentError, CloudFormatError

CLOUD_SUFFIXES = {".xyz": "xyz-text", ".f32": "f32-binary"}


def _validated(points: np.ndarray, origin: str) -> np.ndarray:
    if points.size == 0:
        raise CloudFormatError(f"{origin}: no points found")
    if not np.isfinite(points).all():
        raise CloudFormatError(f"{origin}: non-finite coordinates")
    return points


def load_cloud(path: str | os.PathLike) -> np.ndarray:
    """Read one cloud; the format is chosen by file suffix.

    Returns
    -------
    numpy.ndarray
        Shape ``(n_points, 3)``, dtype float64.

    Raises
    ------
    CloudFormatError
        On malformed text lines (named by line number), a binary payload
        whose size is not a multiple of 12 bytes, an empty file, or
        non-finite coordinates.
    ArgumentError
        On an unrecognized file suffix.
    """
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".xyz":
        rows = []
        with open(path, "r", encoding="ascii") as fh:
            for lineno, line in enumerate(fh, start=1):
                stripped = line.strip()
                if not stripped:
                    continue
                fields = stripped.split()
                if len(fields) != 3:
                    raise CloudFormatError(
                        f"{path}: line {lineno}: expected 3 fields, got {len(fields)}"
                    )
                try:
                    rows.append([float(f) for f in fields])
                except ValueError as exc:
                    raise CloudFormatError(f"{path}: line {lineno}: {exc}") from exc
        return _validated(np.array(rows, dtype=np.float64).reshape(-1, 3), str(path))
    if suffix == ".f32":
        raw = path.read_bytes()
        if len(raw) % 12 != 0:
            raise CloudFormatError(
                f"{path}: byte count {len(raw)} is not a multiple of 12"
            )
        flat = np.frombuffer(raw, dtype="<f4").astype(np.float64)
        return _validated(flat.reshape(-1, 3), str(path))
    raise ArgumentError(f"unsupported cloud suffix: {path.suffix!r}")


def save_cloud(points: np.ndarray, path: str | os.PathLike) -> None:
    """Write one cloud; the format is chosen by file suffix."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3:
        raise ArgumentError(f"expected an (n, 3) array, got shape {points.shape}")
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".xyz":
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            for x, y, z in points.tolist():
                fh.write(f"{x!r} {y!r} {z!r}\n")
        return
    if suffix == ".f32":
        path.write_bytes(points.astype("<f4").tobytes())
        return
    raise ArgumentError(f"unsupported cloud suffix: {path.suffix!r}")


def load_dataset(directory: str | os.PathLike) -> tuple[list[str], list[np.ndarray]]:
    """Load every recognized cloud file in a directory, sorted by name.

    Returns
    -------
    tuple
        ``(ids, clouds)`` where each id is the file stem and each cloud is
        an ``(n_points, 3)`` float64 array.
    """
    directory = Path(directory)
    paths = sorted(
        p for p in directory.iterdir() if p.suffix.lower() in CLOUD_SUFFIXES
    )
    if not paths:
        raise ArgumentError(f"{directory}: no .xyz or .f32 cloud files")
    return [p.stem for p in paths], [load_cloud(p) for p in paths]
