"""2D grid arithmetic shared by every other module.

A grid is a plain 2D float64 ndarray indexed (row, column); pixel (i, j)
means row i, column j. A grid stack is a 3D float64 ndarray with the
channel axis first, all channels sharing one height and width. Grids
returned by exported operations are freshly allocated and never mutated
afterwards, so they are safe to share across workers.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError


def as_grid(a) -> np.ndarray:
    """Coerce to a 2D float64 array, validating dimensionality."""
    g = np.asarray(a, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] < 1 or g.shape[1] < 1:
        raise ShapeError(f"expected a 2D grid, got shape {g.shape}")
    return g


def as_stack(a) -> np.ndarray:
    """Coerce to a (channels, height, width) float64 array, channels >= 1."""
    s = np.asarray(a, dtype=np.float64)
    if s.ndim != 3 or s.shape[0] < 1:
        raise ShapeError(f"expected a nonempty channel stack, got shape {s.shape}")
    return s


def require_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"grid shapes differ: {a.shape} vs {b.shape}")


def inner(a, b) -> float:
    """Euclidean inner product sum_ij a_ij * b_ij."""
    a, b = as_grid(a), as_grid(b)
    require_same_shape(a, b)
    return float(np.sum(a * b))


def norm1(a) -> float:
    """Sum of absolute values."""
    return float(np.sum(np.abs(as_grid(a))))


def norm2(a) -> float:
    """Euclidean norm sqrt(<a, a>)."""
    return float(np.sqrt(np.sum(np.square(as_grid(a)))))


def norm_inf(a) -> float:
    """Maximum absolute value."""
    return float(np.max(np.abs(as_grid(a))))


def axpy(alpha: float, a, b) -> np.ndarray:
    """Return alpha * a + b elementwise."""
    a, b = as_grid(a), as_grid(b)
    require_same_shape(a, b)
    return alpha * a + b
