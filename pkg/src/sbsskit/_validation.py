"""Input validation helpers used by estimators and module functions."""

from __future__ import annotations

import numpy as np

from .errors import DataError


def check_coords(coords, *, min_locations: int = 1) -> np.ndarray:
    """Coerce to a float64 array of shape (n, 2) of finite planar coordinates."""
    arr = np.asarray(coords, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DataError(
            f"coordinates must have shape (n, 2), got {arr.shape}", field="coords"
        )
    if arr.shape[0] < min_locations:
        raise DataError(
            f"need at least {min_locations} locations, got {arr.shape[0]}", field="coords"
        )
    if not np.all(np.isfinite(arr)):
        raise DataError("coordinates contain non-finite values", field="coords")
    return arr


def check_values(values, *, n_locations: int | None = None) -> np.ndarray:
    """Coerce to a float64 matrix of shape (n, p) with no missing entries."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[1] < 1:
        raise DataError(f"values must have shape (n, p), got {arr.shape}", field="values")
    if n_locations is not None and arr.shape[0] != n_locations:
        raise DataError(
            f"values have {arr.shape[0]} rows but there are {n_locations} locations",
            field="values",
        )
    if not np.all(np.isfinite(arr)):
        raise DataError("values contain missing or non-finite entries", field="values")
    return arr


def check_positive_int(value, name: str, *, minimum: int = 1) -> int:
    try:
        ivalue = int(value)
    except (TypeError, ValueError):
        raise DataError(f"{name} must be an integer", field=name) from None
    if ivalue != value or ivalue < minimum:
        raise DataError(f"{name} must be an integer >= {minimum}", field=name)
    return ivalue
