"""Input checks shared by the estimators."""
from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import ConfigurationError, ShapeError


def check_observations(X, n_features: int) -> np.ndarray:
    """2-D float64 array of observations with ``n_features`` columns.

    A single 1-D observation is promoted to a one-row batch.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    X = check_array(X, dtype=np.float64, ensure_all_finite=True)
    if X.shape[1] != n_features:
        raise ShapeError(f"expected {n_features} features per observation, got {X.shape[1]}")
    return X


def check_interval(name, value, low=None, high=None, *, low_open=False, high_open=False):
    """Raise ConfigurationError unless ``value`` lies in the given interval."""
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{name} must be a number, got {value!r}") from None
    if not np.isfinite(v):
        raise ConfigurationError(f"{name} must be finite, got {value!r}")
    if low is not None and (v <= low if low_open else v < low):
        raise ConfigurationError(f"{name}={value} is below its lower bound {low}")
    if high is not None and (v >= high if high_open else v > high):
        raise ConfigurationError(f"{name}={value} is above its upper bound {high}")
    return v


def check_choice(name, value, choices):
    if value not in choices:
        raise ConfigurationError(f"{name} must be one of {choices}, got {value!r}")
    return value
