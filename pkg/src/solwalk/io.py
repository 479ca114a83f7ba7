"""Sample files and JSON documents.

CSV holds one float per line with 17 significant digits. The binary layout is
the 8-byte magic ``SOLXI001``, a little-endian u64 count, then that many
little-endian float64 values.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ValidationError

MAGIC = b"SOLXI001"


def write_samples(path, samples, fmt: str = "csv") -> None:
    xs = np.asarray(samples, dtype=float)
    path = Path(path)
    if fmt == "bin":
        with path.open("wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<Q", xs.size))
            fh.write(xs.astype("<f8").tobytes())
    elif fmt == "csv":
        with path.open("w", newline="\n") as fh:
            fh.write("".join(f"{x:.17g}\n" for x in xs.tolist()))
    else:
        raise ValidationError(f"unknown sample format {fmt!r}")


def read_samples(path) -> np.ndarray:
    """Read either format; the binary magic decides."""
    path = Path(path)
    with path.open("rb") as fh:
        head = fh.read(len(MAGIC))
        if head == MAGIC:
            (count,) = struct.unpack("<Q", fh.read(8))
            data = np.frombuffer(fh.read(), dtype="<f8")
            if data.size != count:
                raise ValidationError(f"{path}: header says {count} samples, found {data.size}")
            return data.astype(float)
    try:
        return np.loadtxt(path, dtype=float, ndmin=1)
    except ValueError as exc:
        raise ValidationError(f"{path}: not a sample file ({exc})") from exc


def dumps(doc) -> str:
    """Canonical JSON text so equal reports are byte-identical."""
    return json.dumps(doc, indent=2, sort_keys=True, default=_default) + "\n"


def _default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def write_json(path, doc) -> None:
    Path(path).write_text(dumps(doc))


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
