"""Delta and Delta Plus curves built from year-over-year differences."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import InsufficientDataError
from ..panel import AgeCurve, PerformancePanel


@dataclass(frozen=True)
class DeltaDiagnostics:
    deltas: np.ndarray
    pair_counts: np.ndarray
    observed_means: np.ndarray


def _deltas(panel: PerformancePanel) -> DeltaDiagnostics:
    Y = panel.values
    both = panel.mask[:, :-1] & panel.mask[:, 1:]
    pair_counts = both.sum(axis=0)
    empty = np.flatnonzero(pair_counts == 0)
    if empty.size:
        t = panel.grid.t_min + int(empty[0])
        raise InsufficientDataError(
            f"no player observed at both age {t} and age {t + 1}"
        )
    diffs = np.where(both, Y[:, 1:] - Y[:, :-1], 0.0)
    deltas = diffs.sum(axis=0) / pair_counts
    counts = panel.observed_count()
    with np.errstate(invalid="ignore"):
        means = np.where(counts > 0, np.nansum(Y, axis=0) / counts, np.nan)
    return DeltaDiagnostics(deltas, pair_counts, means)


def delta_curve(panel: PerformancePanel):
    """Delta Method curve with its peak fixed at 0.

    Differences between adjacent ages are averaged over the players seen
    at both ages, accumulated from the youngest age, and shifted so the
    maximum is zero.

    Returns
    -------
    (AgeCurve, DeltaDiagnostics)
    """
    diag = _deltas(panel)
    level = np.concatenate([[0.0], np.cumsum(diag.deltas)])
    curve = AgeCurve(panel.grid, level - level.max(), panel.observed_count())
    return curve, diag


def delta_plus_curve(panel: PerformancePanel):
    """Delta curve lifted so its peak equals the largest per-age observed mean."""
    curve, diag = delta_curve(panel)
    return curve.shifted(float(np.nanmax(diag.observed_means))), diag
