"""Natural cubic regression splines.

The basis is the truncated-power form of a natural cubic spline with
``df`` knots (two boundary, ``df - 2`` interior)::

    N_1 = 1,  N_2 = u,  N_{j+2} = d_j(u) - d_{df-1}(u)
    d_j(u) = ((u - k_j)^3_+ - (u - k_df)^3_+) / (k_df - k_j)

with ages rescaled to ``u`` in [0, 1] over the boundary. The first column
is the constant, which callers rely on when absorbing intercepts. Every
combination is linear beyond the boundary knots.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import InvalidParameterError, OutOfRangeError
from .numerics import AgeGrid


def spline_knots(ages, df: int, boundary: AgeGrid) -> np.ndarray:
    """Knot vector (boundary included) for a ``df``-column basis.

    Interior knots sit at equally spaced quantiles of ``ages``. Integer
    ages often make neighbouring quantiles coincide; in that case the
    quantiles of the distinct ages are tried, then an even spacing over
    the boundary.
    """
    _check_df(df)
    lo, hi = float(boundary.t_min), float(boundary.t_max)
    n_inner = df - 2
    if n_inner == 0:
        return np.array([lo, hi])
    probs = np.arange(1, n_inner + 1) / (n_inner + 1)
    ages = np.asarray(ages, dtype=float).ravel()
    candidates = []
    if ages.size:
        candidates.append(np.quantile(ages, probs))
        candidates.append(np.quantile(np.unique(ages), probs))
    candidates.append(lo + probs * (hi - lo))
    for inner in candidates:
        knots = np.concatenate([[lo], inner, [hi]])
        if np.all(np.diff(knots) > 1e-9 * (hi - lo)):
            return knots
    raise InvalidParameterError(f"cannot place {n_inner} interior knots")


def natural_spline_design(x, knots) -> np.ndarray:
    """Evaluate the natural spline basis for ``knots`` at ``x`` (no range check)."""
    x = np.asarray(x, dtype=float).ravel()
    knots = np.asarray(knots, dtype=float)
    lo, hi = knots[0], knots[-1]
    u = (x - lo) / (hi - lo)
    k = (knots - lo) / (hi - lo)
    df = k.size
    cols = [np.ones_like(u), u]

    def d(j):
        return (np.maximum(u - k[j], 0.0) ** 3 - np.maximum(u - k[-1], 0.0) ** 3) / (
            k[-1] - k[j]
        )

    last = d(df - 2)
    for j in range(df - 2):
        cols.append(d(j) - last)
    return np.column_stack(cols)


def natural_spline_basis(ages, df: int, boundary: AgeGrid, knots=None,
                         extrapolate: bool = False) -> np.ndarray:
    """Natural cubic spline basis matrix with ``df`` columns.

    Parameters
    ----------
    ages : array-like
        Ages at which to evaluate the basis.
    df : int
        Basis dimension (>= 2). ``df = 2`` spans straight lines.
    boundary : AgeGrid
        Boundary knots are ``boundary.t_min`` and ``boundary.t_max``.
    knots : array-like, optional
        Precomputed knot vector from :func:`spline_knots`. When omitted the
        interior knots are placed at quantiles of ``ages``.
    extrapolate : bool
        Permit ages outside the boundary (the fit continues linearly).
    """
    _check_df(df)
    ages = np.asarray(ages, dtype=float).ravel()
    if not extrapolate and ages.size and (
        ages.min() < boundary.t_min or ages.max() > boundary.t_max
    ):
        raise OutOfRangeError(
            f"ages must lie within [{boundary.t_min}, {boundary.t_max}]"
        )
    if knots is None:
        knots = spline_knots(ages, df, boundary)
    elif len(knots) != df:
        raise InvalidParameterError(f"expected {df} knots, got {len(knots)}")
    return natural_spline_design(ages, knots)


def _check_df(df):
    if int(df) != df or df < 2:
        raise InvalidParameterError(f"degrees of freedom must be an integer >= 2, got {df}")


class NaturalSplineBasis(TransformerMixin, BaseEstimator):
    """Expand a single age column into a natural cubic spline basis.

    Knots are learned in :meth:`fit` from the training ages so that new
    ages are expanded on the same basis.

    Parameters
    ----------
    df : int, default=6
    t_min, t_max : int
        Boundary knots.
    extrapolate : bool, default=False
    """

    def __init__(self, df=6, t_min=18, t_max=40, extrapolate=False):
        self.df = df
        self.t_min = t_min
        self.t_max = t_max
        self.extrapolate = extrapolate

    def fit(self, X, y=None):
        ages = _age_column(X)
        self.grid_ = AgeGrid(self.t_min, self.t_max)
        if not self.extrapolate and (ages.min() < self.t_min or ages.max() > self.t_max):
            raise OutOfRangeError(f"ages must lie within [{self.t_min}, {self.t_max}]")
        self.knots_ = spline_knots(ages, self.df, self.grid_)
        self.n_features_in_ = 1
        return self

    def transform(self, X):
        check_is_fitted(self, "knots_")
        return natural_spline_basis(_age_column(X), self.df, self.grid_,
                                    knots=self.knots_, extrapolate=self.extrapolate)

    def get_feature_names_out(self, input_features=None):
        return np.array([f"ns{j}" for j in range(self.df)], dtype=object)


def _age_column(X) -> np.ndarray:
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 2:
        if arr.shape[1] != 1:
            raise InvalidParameterError("expected a single age column")
        arr = arr[:, 0]
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidParameterError("expected a nonempty 1-d array of ages")
    return arr
