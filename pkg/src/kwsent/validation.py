"""Input validation helpers shared by the estimator-facing API."""

from __future__ import annotations

import numpy as np


def as_points(X) -> np.ndarray:
    """Coerce X to a 2-D float64 array of finite points.

    Accepts anything array-like with shape (n_samples, n_features).
    """
    points = np.asarray(X, dtype=np.float64)
    if points.ndim == 1:
        points = points.reshape(-1, 1)
    if points.ndim != 2:
        raise ValueError(f"expected a 2-D array of points, got ndim={points.ndim}")
    if points.shape[0] == 0:
        raise ValueError("expected at least one point")
    if not np.all(np.isfinite(points)):
        raise ValueError("points contain NaN or infinite values")
    return points


def check_positive(name: str, value) -> None:
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value!r}")


def check_at_least(name: str, value, minimum) -> None:
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value!r}")


def check_fraction(name: str, value) -> None:
    if not (0.0 < value <= 1.0):
        raise ValueError(f"{name} must lie in (0, 1], got {value!r}")


def check_index(name: str, value: int, limit: int) -> None:
    if not (0 <= value < limit):
        raise ValueError(f"{name} must lie in [0, {limit}), got {value!r}")
