"""Input validation helpers shared by the public entry points."""

from __future__ import annotations

import numpy as np

from .model import Field2D

__all__ = ["as_field"]


def as_field(X) -> Field2D:
    """Coerce a Field2D or real 2-D array-like into a Field2D.

    Arrays are assumed to start at lattice origin (0, 0).  Raises on
    non-2-D or non-finite input.
    """
    if isinstance(X, Field2D):
        return X
    arr = np.asarray(X, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D field, got array with shape {arr.shape}")
    return Field2D(arr)
