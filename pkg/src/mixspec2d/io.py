"""File formats: the binary grid file, CSV grids, and JSON documents.

Grid file layout (little-endian throughout):

    bytes 0..7    magic b"MXSPEC2D"
    bytes 8..15   N (rows) as uint64
    bytes 16..23  M (cols) as uint64
    then          N*M IEEE-754 float64 samples, row-major

The CSV grid alternative is one row of comma-separated samples per lattice
row.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .exceptions import ConfigError
from .model import Field2D

__all__ = [
    "GRID_MAGIC",
    "write_grid",
    "read_grid",
    "write_grid_csv",
    "read_grid_csv",
    "load_json",
    "dump_json",
]

GRID_MAGIC = b"MXSPEC2D"
_HEADER = struct.Struct("<8sQQ")


def write_grid(path, field: Field2D) -> None:
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(_HEADER.pack(GRID_MAGIC, field.n_rows, field.n_cols))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_grid(path) -> Field2D:
    """Read a grid file; transparently falls back to CSV when the magic is
    absent."""
    path = Path(path)
    with path.open("rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) >= len(GRID_MAGIC) and head[: len(GRID_MAGIC)] == GRID_MAGIC:
            if len(head) < _HEADER.size:
                raise ConfigError(f"{path}: truncated grid header")
            _, n_rows, n_cols = _HEADER.unpack(head)
            payload = fh.read()
            expected = 8 * n_rows * n_cols
            if len(payload) < expected:
                raise ConfigError(
                    f"{path}: grid payload holds {len(payload)} bytes, expected {expected}"
                )
            values = np.frombuffer(payload[:expected], dtype="<f8").reshape(n_rows, n_cols)
            return Field2D(values)
    return read_grid_csv(path)


def write_grid_csv(path, field: Field2D) -> None:
    with Path(path).open("w") as fh:
        for row in field.values:
            fh.write(",".join(repr(float(x)) for x in row))
            fh.write("\n")


def read_grid_csv(path) -> Field2D:
    try:
        values = np.loadtxt(Path(path), delimiter=",", ndmin=2)
    except ValueError as exc:
        raise ConfigError(f"{path}: not a grid file or CSV grid ({exc})") from exc
    return Field2D(values)


def load_json(path) -> dict:
    path = Path(path)
    try:
        with path.open("r") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def dump_json(path, doc) -> None:
    with Path(path).open("w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
