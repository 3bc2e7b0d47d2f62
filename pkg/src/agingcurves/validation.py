"""Input checking helpers shared by the estimator classes and the CLI."""

from __future__ import annotations

import numbers

import numpy as np

from .exceptions import InvalidParameterError
from .panel import EstimatorSpec, PerformancePanel, panel_from_array


def check_rng(random_state=None) -> np.random.Generator:
    """Turn ``None``, an int seed, a SeedSequence or a Generator into a Generator."""
    if isinstance(random_state, np.random.Generator):
        return random_state
    if random_state is None or isinstance(random_state, (numbers.Integral, np.random.SeedSequence)):
        return np.random.default_rng(random_state)
    raise InvalidParameterError(f"cannot build a random generator from {random_state!r}")


def check_panel(X, t_min: int = 18) -> PerformancePanel:
    """Accept a :class:`PerformancePanel` or an ``N x K`` array with ``NaN`` gaps."""
    if isinstance(X, PerformancePanel):
        return X
    arr = np.asarray(X, dtype=float)
    if arr.ndim != 2 or arr.shape[1] < 2:
        raise InvalidParameterError(
            f"expected an N x K panel array with K >= 2, got shape {arr.shape}"
        )
    if np.any(np.isinf(arr)):
        raise InvalidParameterError("panel values must be finite or NaN")
    return panel_from_array(arr, t_min)


def check_spec(spec, **kwargs) -> EstimatorSpec:
    if isinstance(spec, EstimatorSpec):
        return spec
    return EstimatorSpec.parse(str(spec), **kwargs)
