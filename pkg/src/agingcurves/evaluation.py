"""Scoring estimated curves against the truth, and bootstrap curve bundles."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .estimate import estimate
from .exceptions import AgingCurveError, DegenerateCurveError, GridError, InvalidParameterError
from .numerics import AgeGrid
from .panel import AgeCurve, PerformancePanel
from .validation import check_spec

log = logging.getLogger(__name__)

MAX_RETRIES = 3


def rmse_by_age(estimates, truth: AgeCurve) -> np.ndarray:
    """Root mean squared error at each age across a list of estimated curves."""
    estimates = list(estimates)
    if not estimates:
        raise InvalidParameterError("need at least one estimate")
    for est in estimates:
        if est.grid != truth.grid:
            raise GridError("estimate and truth grids differ")
    err = np.stack([est.g for est in estimates]) - truth.g[None, :]
    return np.sqrt(np.mean(err**2, axis=0))


def cross_correlation(x, y) -> np.ndarray:
    """Zero-padded cross-correlation of ``x`` against ``y`` at shifts
    ``-(m-1)..(m-1)`` (index ``m - 1`` is shift 0)."""
    return np.correlate(np.asarray(x, float), np.asarray(y, float), mode="full")


def shape_based_distance(x, y, znormalize: bool = False) -> float:
    """``1 - max_s NCC_c(x, y; s)`` with coefficient normalisation.

    Accepts :class:`AgeCurve` objects or equal-length vectors. The value
    lies in [0, 2]; it is 0 when ``y`` is a positive multiple of ``x``.
    """
    if isinstance(x, AgeCurve) and isinstance(y, AgeCurve) and x.grid != y.grid:
        raise GridError("curves must share a grid")
    xv = np.asarray(getattr(x, "g", x), dtype=float)
    yv = np.asarray(getattr(y, "g", y), dtype=float)
    if xv.shape != yv.shape or xv.ndim != 1:
        raise GridError("curves must be 1-d and of equal length")
    if znormalize:
        xv = (xv - xv.mean()) / (xv.std() or 1.0)
        yv = (yv - yv.mean()) / (yv.std() or 1.0)
    denom = np.linalg.norm(xv) * np.linalg.norm(yv)
    if denom == 0:
        raise DegenerateCurveError("shape-based distance is undefined for a zero curve")
    ncc = cross_correlation(xv, yv) / denom
    return float(min(max(1.0 - ncc.max(), 0.0), 2.0))


def bootstrap_curves(panel: PerformancePanel, spec, B: int, rng=None,
                     pool_size=None, resample=None):
    """Refit ``spec`` on ``B`` player-level bootstrap resamples.

    Whole player rows (values and mask) are drawn with replacement. Draw
    ``b`` uses generators derived from the root seed and ``b``; a draw
    whose fit fails is retried with the next derived seed up to three
    times and then reported as ``None``.

    Parameters
    ----------
    resample : callable, optional
        ``resample(rng, n_players) -> row indices``; replaces the default
        uniform draw (used to force particular resamples in tests).

    Returns
    -------
    list of AgeCurve or None, length ``B``
    """
    if B < 1:
        raise InvalidParameterError("B must be at least 1")
    spec = check_spec(spec)
    root = rng if isinstance(rng, np.random.SeedSequence) else np.random.SeedSequence(rng)
    N = panel.n_players
    draw = resample or (lambda g, n: g.integers(0, n, size=n))
    curves = []
    for b in range(B):
        curve = None
        for attempt in range(MAX_RETRIES + 1):
            seq = np.random.SeedSequence(root.entropy, spawn_key=root.spawn_key + (b, attempt))
            g = np.random.default_rng(seq)
            rows = np.asarray(draw(g, N))
            try:
                curve = estimate(panel.subset_rows(rows), spec, pool_size, g).curve
                break
            except (AgingCurveError, np.linalg.LinAlgError) as exc:
                log.debug("bootstrap draw %d attempt %d failed: %s", b, attempt, exc)
        if curve is None:
            log.warning("bootstrap draw %d failed after %d retries", b, MAX_RETRIES)
        curves.append(curve)
    return curves


@dataclass
class SpecCellResult:
    """Accumulated scores for one (cell, spec) pair."""

    sq_err_sum: np.ndarray
    n_ok: int = 0
    sbd_values: list = field(default_factory=list)
    failure_count: int = 0

    @property
    def rmse_by_age(self) -> np.ndarray:
        if self.n_ok == 0:
            return np.full(self.sq_err_sum.shape, np.nan)
        return np.sqrt(self.sq_err_sum / self.n_ok)


class EvaluationReport:
    """Per-age RMSE and per-replication SBD for each (cell, spec) pair.

    Squared errors are accumulated, so pooled RMSEs over several cells
    (``rmse_table_by_n``) are exact.
    """

    def __init__(self, grid: AgeGrid, cells, spec_names):
        self.grid = grid
        self.cells = list(cells)
        self.spec_names = list(spec_names)
        self.per_cell = {
            (c, s): SpecCellResult(np.zeros(grid.K)) for c in self.cells for s in self.spec_names
        }

    def record(self, cell, spec_name, estimate_curve: AgeCurve, truth: AgeCurve):
        res = self.per_cell[(cell, spec_name)]
        res.sq_err_sum = res.sq_err_sum + (estimate_curve.g - truth.g) ** 2
        res.n_ok += 1
        try:
            res.sbd_values.append(shape_based_distance(estimate_curve, truth))
        except DegenerateCurveError:
            res.sbd_values.append(float("nan"))

    def record_failure(self, cell, spec_name):
        self.per_cell[(cell, spec_name)].failure_count += 1

    def result(self, cell, spec_name) -> SpecCellResult:
        return self.per_cell[(cell, spec_name)]

    def pooled(self, spec_name, cells=None):
        """RMSE by age, all SBD values and failures pooled over ``cells``."""
        cells = self.cells if cells is None else cells
        sq = np.zeros(self.grid.K)
        n = fails = 0
        sbd = []
        for c in cells:
            r = self.per_cell[(c, spec_name)]
            sq = sq + r.sq_err_sum
            n += r.n_ok
            fails += r.failure_count
            sbd.extend(r.sbd_values)
        rmse = np.sqrt(sq / n) if n else np.full(self.grid.K, np.nan)
        return rmse, np.array(sbd), fails

    def mean_rmse(self, spec_name, cells=None) -> float:
        """Age-averaged RMSE."""
        return float(np.mean(self.pooled(spec_name, cells)[0]))

    def median_sbd(self, spec_name, cells=None) -> float:
        sbd = self.pooled(spec_name, cells)[1]
        sbd = sbd[np.isfinite(sbd)]
        return float(np.median(sbd)) if sbd.size else float("nan")

    def to_frame(self) -> pd.DataFrame:
        """Long format: one row per (cell, spec, age)."""
        rows = []
        for c in self.cells:
            for s in self.spec_names:
                r = self.per_cell[(c, s)]
                for age, v in zip(self.grid.ages, r.rmse_by_age):
                    rows.append((c.label, c.n_players, c.omega, c.sigma_gamma, s, int(age),
                                 v, r.n_ok, r.failure_count))
        return pd.DataFrame(rows, columns=["cell", "n_players", "omega", "sigma_gamma", "spec",
                                           "age", "rmse", "n_ok", "failures"])

    def sbd_frame(self) -> pd.DataFrame:
        rows = []
        for c in self.cells:
            for s in self.spec_names:
                for rep, v in enumerate(self.per_cell[(c, s)].sbd_values):
                    rows.append((c.label, s, rep, v))
        return pd.DataFrame(rows, columns=["cell", "spec", "replication", "sbd"])

    def rmse_table_by_n(self) -> pd.DataFrame:
        """Appendix-style table: rows (N, spec), one column per age."""
        records = []
        for n in sorted({c.n_players for c in self.cells}):
            cells = [c for c in self.cells if c.n_players == n]
            for s in self.spec_names:
                rmse = self.pooled(s, cells)[0]
                records.append({"n_players": n, "spec": s,
                                **{str(a): v for a, v in zip(self.grid.ages, rmse)}})
        return pd.DataFrame.from_records(records)

    def summary(self) -> dict:
        specs = {}
        for s in self.spec_names:
            _, sbd, fails = self.pooled(s)
            specs[s] = {
                "mean_rmse": _json_float(self.mean_rmse(s)),
                "median_sbd": _json_float(self.median_sbd(s)),
                "failures": int(fails),
                "n_estimates": int(sum(self.per_cell[(c, s)].n_ok for c in self.cells)),
            }
        cells = [
            {
                "cell": c.label,
                "n_players": c.n_players,
                "omega": c.omega,
                "sigma_gamma": c.sigma_gamma,
                "specs": {
                    s: {
                        "mean_rmse": _json_float(self.mean_rmse(s, [c])),
                        "median_sbd": _json_float(self.median_sbd(s, [c])),
                        "failures": self.per_cell[(c, s)].failure_count,
                    }
                    for s in self.spec_names
                },
            }
            for c in self.cells
        ]
        return {"ages": [int(a) for a in self.grid.ages], "specs": specs, "cells": cells}

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=False)


def _json_float(v):
    return None if not np.isfinite(v) else float(v)
