"""Semantic codec layer: power normalization, a deterministic baseline
codec, and the binary archive format for externally trained codes.

The baseline codec is farthest-point sampling plus round-robin replication.
It is parameter-free and lossless at full rate, so the transmission and
metrics layers can run without any trained model. Externally produced codes
enter through ``load_external_codes``; the archive carries the scale factor
needed to undo power normalization at decode time.
"""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ArchiveFormatError, ArgumentError, NormalizationError, ValidationError
from .pointcloud import PointCloud

ARCHIVE_MAGIC = b"QSCC"
ARCHIVE_VERSION = 1

# Relative tolerance on |sum(values^2) - n| accepted when loading archives.
ARCHIVE_POWER_TOL = 1e-3

# Code lengths used for published-comparable runs.
STANDARD_CODE_LENGTHS = (10, 20, 50, 100, 200, 300)


class CodecKind(Enum):
    BASELINE_FPS = "baseline-fps"
    EXTERNAL_NEURAL = "external-neural"


@dataclass(frozen=True)
class SemanticCode:
    """Length-n power-normalized feature vector.

    ``scale`` is the factor that undoes power normalization (multiply by it
    to recover the raw vector); it is None for codes that never carried one.
    """

    values: np.ndarray
    scale: float | None = None

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 1 or vals.shape[0] < 1:
            raise ValidationError(f"code values must be a nonempty vector, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValidationError("code values contain non-finite entries")
        if self.scale is not None and not (math.isfinite(self.scale) and self.scale > 0):
            raise ValidationError(f"scale must be positive and finite, got {self.scale}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class CodecDescriptor:
    """Which codec to run and at what code length."""

    kind: CodecKind
    n: int
    source: str | None = None

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValidationError(f"code length must be positive, got {self.n}")
        if self.kind is CodecKind.EXTERNAL_NEURAL and self.source is None:
            raise ValidationError("external-neural codec requires a source archive path")


def power_normalize(v: np.ndarray, n: int) -> np.ndarray:
    """Scale v so its total symbol energy equals its length n."""
    vec = np.asarray(v, dtype=np.float64)
    if vec.ndim != 1 or vec.shape[0] != n:
        raise ArgumentError(f"expected a length-{n} vector, got shape {vec.shape}")
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise NormalizationError("cannot power-normalize the zero vector")
    return vec * (math.sqrt(n) / norm)


def _fps_indices(points: np.ndarray, m: int) -> np.ndarray:
    """Farthest-point sampling order, seeded at the lowest-index point of
    minimal x-coordinate. Distance ties keep the lowest candidate index.
    """
    seed = int(np.argmin(points[:, 0]))
    chosen = [seed]
    diff = points - points[seed]
    min_d2 = np.einsum("ij,ij->i", diff, diff)
    for _ in range(1, m):
        nxt = int(np.argmax(min_d2))
        chosen.append(nxt)
        diff = points - points[nxt]
        np.minimum(min_d2, np.einsum("ij,ij->i", diff, diff), out=min_d2)
    return np.asarray(chosen, dtype=np.int64)


def baseline_encode(cloud: PointCloud, n: int) -> SemanticCode:
    """Encode by farthest-point sampling n/3 points and power-normalizing
    their flattened coordinates.
    """
    if n < 1 or n % 3 != 0:
        raise ArgumentError(f"code length must be a positive multiple of 3, got {n}")
    m = n // 3
    if m > cloud.n_points:
        raise ArgumentError(f"code length {n} needs {m} points, cloud has {cloud.n_points}")
    idx = _fps_indices(cloud.points, m)
    raw = cloud.points[idx].reshape(-1)
    norm = float(np.linalg.norm(raw))
    if norm == 0.0:
        raise NormalizationError("cannot encode a cloud collapsed onto the origin")
    scale = norm / math.sqrt(n)
    return SemanticCode(values=raw / scale, scale=scale)


def baseline_decode(code: SemanticCode, target_n_points: int) -> PointCloud:
    """Undo normalization, reshape to points, and replicate round-robin."""
    if target_n_points < 1:
        raise ArgumentError(f"target point count must be positive, got {target_n_points}")
    if code.n % 3 != 0:
        raise ArgumentError(f"code length {code.n} is not a multiple of 3")
    if code.scale is None:
        raise ArchiveFormatError("code carries no scale factor; cannot undo normalization")
    base = (code.values * code.scale).reshape(-1, 3)
    m = base.shape[0]
    reps = np.arange(target_n_points) % m
    return PointCloud(base[reps])


def quantize_f32(code: SemanticCode) -> SemanticCode:
    """Round values to their 32-bit transmitted representation."""
    return SemanticCode(values=code.values.astype("<f4").astype(np.float64), scale=code.scale)


def code_bits(code: SemanticCode) -> np.ndarray:
    """Bit expansion (LSB-first per byte) of the 32-bit code values."""
    packed = np.frombuffer(code.values.astype("<f4").tobytes(), dtype=np.uint8)
    return np.unpackbits(packed, bitorder="little")


def save_code_archive(records: list[tuple[str, SemanticCode]], path: str | os.PathLike) -> None:
    """Write codes with identifiers in the shared binary archive format."""
    with open(path, "wb") as fh:
        fh.write(ARCHIVE_MAGIC)
        fh.write(struct.pack("<HI", ARCHIVE_VERSION, len(records)))
        for ident, code in records:
            if code.scale is None:
                raise ArchiveFormatError(f"record {ident!r} has no scale factor")
            ident_bytes = ident.encode("utf-8")
            fh.write(struct.pack("<H", len(ident_bytes)))
            fh.write(ident_bytes)
            fh.write(struct.pack("<Id", code.n, code.scale))
            fh.write(code.values.astype("<f4").tobytes())


def load_external_codes(path: str | os.PathLike) -> list[tuple[SemanticCode, str]]:
    """Read all records of a code archive, checking power normalization.

    Raises
    ------
    ArchiveFormatError
        On magic/version mismatch, truncation, or a record whose energy
        deviates from its length by more than 1e-3 relative; record-level
        failures name the record index.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    pos = 0

    def take(count: int, what: str) -> bytes:
        nonlocal pos
        if pos + count > len(raw):
            raise ArchiveFormatError(f"{path}: truncated while reading {what} at byte {pos}")
        chunk = raw[pos:pos + count]
        pos += count
        return chunk

    if take(4, "magic") != ARCHIVE_MAGIC:
        raise ArchiveFormatError(f"{path}: bad magic bytes")
    version, count = struct.unpack("<HI", take(6, "header"))
    if version != ARCHIVE_VERSION:
        raise ArchiveFormatError(f"{path}: unsupported version {version}")
    out: list[tuple[SemanticCode, str]] = []
    for rec in range(count):
        (ident_len,) = struct.unpack("<H", take(2, f"record {rec} id length"))
        ident = take(ident_len, f"record {rec} id").decode("utf-8")
        n, scale = struct.unpack("<Id", take(12, f"record {rec} header"))
        if n < 1:
            raise ArchiveFormatError(f"{path}: record {rec} has invalid length {n}")
        values = np.frombuffer(take(4 * n, f"record {rec} values"), dtype="<f4").astype(np.float64)
        energy = float(np.sum(values * values))
        if abs(energy - n) / n > ARCHIVE_POWER_TOL:
            raise ArchiveFormatError(
                f"{path}: record {rec} violates power normalization "
                f"(energy {energy:.6g} for length {n})"
            )
        out.append((SemanticCode(values=values, scale=scale), ident))
    if pos != len(raw):
        raise ArchiveFormatError(f"{path}: {len(raw) - pos} trailing bytes after last record")
    return out
