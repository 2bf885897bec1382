"""Code-archive export in the format consumed by the simulator package.

Archive layout (all integers little-endian): magic ``b"QSCC"``, version
u16 = 1, record count u32; then per record an identifier (u16 length +
UTF-8 bytes), the code length ``n`` as u32, a scale factor f64, and ``n``
little-endian 4-byte reals.  The writer is self-contained so the two
packages share only the bytes on disk.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np
import torch

from .errors import ArgumentError, ExportError
from .models import Decoder, Encoder
from .train import _stacked

ARCHIVE_MAGIC = b"QSCC"
ARCHIVE_VERSION = 1
ARCHIVE_POWER_TOL = 1e-3


def write_code_archive(
    path: str | os.PathLike, records: list[tuple[str, float, np.ndarray]]
) -> None:
    """Write ``(identifier, scale, values)`` records to an archive file.

    Values are stored as little-endian 4-byte reals; each record's stored
    power must satisfy ``|sum(v**2) - n| / n <= 1e-3`` or the archive
    would be rejected on load, so violations raise here instead.

    Raises
    ------
    ExportError
        On a power-check violation (named by record index) or a failed
        write.
    """
    blob = bytearray()
    blob += ARCHIVE_MAGIC
    blob += struct.pack("<HI", ARCHIVE_VERSION, len(records))
    for index, (identifier, scale, values) in enumerate(records):
        stored = np.asarray(values, dtype="<f4")
        if stored.ndim != 1 or stored.size == 0:
            raise ArgumentError(
                f"record {index}: expected a non-empty 1-d value array"
            )
        n = stored.size
        power = float((stored.astype(np.float64) ** 2).sum())
        if abs(power - n) / n > ARCHIVE_POWER_TOL:
            raise ExportError(
                f"record {index}: stored power {power:.6f} deviates from "
                f"{n} beyond tolerance {ARCHIVE_POWER_TOL}"
            )
        encoded = identifier.encode("utf-8")
        blob += struct.pack("<H", len(encoded))
        blob += encoded
        blob += struct.pack("<Id", n, float(scale))
        blob += stored.tobytes()
    try:
        Path(path).write_bytes(bytes(blob))
    except OSError as exc:
        raise ExportError(f"cannot write {path}: {exc}") from exc


def export_codes(
    models: tuple[Encoder, Decoder],
    dataset,
    path: str | os.PathLike,
    ids: list[str] | None = None,
) -> int:
    """Encode every cloud and write the resulting codes to an archive.

    Parameters
    ----------
    models : tuple
        Pair from :func:`build_models`; only the encoder is consulted.
    dataset : sequence of array-like
        Clouds of identical shape ``(n_points, 3)``.
    ids : list of str, optional
        Per-cloud identifiers; defaults to ``cloud-0000`` numbering.

    Returns
    -------
    int
        Number of records written.
    """
    encoder, _ = models
    clouds = _stacked(dataset)
    count = clouds.shape[0]
    if ids is None:
        ids = [f"cloud-{i:04d}" for i in range(count)]
    if len(ids) != count:
        raise ArgumentError(f"got {len(ids)} ids for {count} clouds")
    with torch.no_grad():
        codes, scales = encoder.encode_with_scale(clouds)
    records = [
        (ids[i], float(scales[i]), codes[i].numpy()) for i in range(count)
    ]
    write_code_archive(path, records)
    return count
