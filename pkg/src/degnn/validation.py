"""Input validation helpers shared across the package."""

from __future__ import annotations

import numpy as np


def as_index_array(values, name: str = "indices") -> np.ndarray:
    """Coerce to a 1-D int64 array, rejecting floats that are not integral."""
    arr = np.asarray(values)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.floor(arr)):
            raise ValueError(f"{name} must be integers")
    return arr.astype(np.int64, copy=False)


def check_node_ids(ids, num_nodes: int, name: str = "node ids") -> np.ndarray:
    ids = as_index_array(ids, name)
    if ids.size:
        lo, hi = int(ids.min()), int(ids.max())
        if lo < 0 or hi >= num_nodes:
            raise ValueError(
                f"{name} must lie in [0, {num_nodes}), got range [{lo}, {hi}]"
            )
    return ids


def check_positive_int(value, name: str) -> int:
    value = int(value)
    if value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value}")
    return value


def check_fraction(value, name: str, *, inclusive_high: bool = True) -> float:
    value = float(value)
    high_ok = value <= 1.0 if inclusive_high else value < 1.0
    if not (0.0 <= value and high_ok):
        bound = "[0, 1]" if inclusive_high else "[0, 1)"
        raise ValueError(f"{name} must lie in {bound}, got {value}")
    return value


def check_matrix(X, name: str = "X", *, dtype=np.float64) -> np.ndarray:
    """Validate a dense 2-D numeric array and return it as ``dtype``."""
    arr = np.asarray(X, dtype=dtype)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_seed(seed) -> int:
    if seed is None:
        return 0
    if not isinstance(seed, (int, np.integer)):
        raise ValueError(f"seed must be an integer, got {seed!r}")
    return int(seed)
