"""Preset dispatch and the scikit-learn style estimator."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .estimators.delta import delta_plus_curve
from .estimators.quantile import quantile_curve
from .estimators.regression import fit_regression_curve
from .exceptions import InvalidParameterError
from .imputation import ImputationConfig, impute_panel
from .panel import EstimatorSpec, FitResult, PerformancePanel, PlayerEffects
from .validation import check_panel, check_rng, check_spec


def _observed_residual_sd(panel, curve):
    rows, cols, y = panel.observed_cells()
    resid = y - curve.g[cols]
    return float(np.std(resid, ddof=1)) if resid.size > 1 else 0.0


def estimate(panel: PerformancePanel, spec, pool_size=None, rng=None) -> FitResult:
    """Estimate the mean aging curve of ``panel`` with one preset.

    ``obs`` specs use observed cells only; ``trunc``/``notrunc`` specs
    complete the panel by imputation first and fit the completed panel.
    ``quant:trunc:fixed`` imputes around quantile-mapped means and reports
    a fixed-effects spline fit.
    """
    spec = check_spec(spec)
    if spec.method == "delta-plus":
        curve, diag = delta_plus_curve(panel)
        return FitResult(curve, PlayerEffects.none(panel.n_players),
                         _observed_residual_sd(panel, curve), spec, diagnostics=diag)
    if spec.data == "obs":
        if spec.method == "quant":
            curve, diag = quantile_curve(panel, pool_size, spec.boundary_quantile)
            return FitResult(curve, PlayerEffects.none(panel.n_players),
                             _observed_residual_sd(panel, curve), spec, diagnostics=diag)
        return fit_regression_curve(panel, spec)

    completed, trace = impute_panel(panel, spec, ImputationConfig.for_spec(spec),
                                    check_rng(rng), pool_size)
    if spec.method == "quant":
        final = EstimatorSpec("spline", "obs", "fixed", spline_df=spec.spline_df,
                              boundary_quantile=spec.boundary_quantile)
        fit = fit_regression_curve(completed, final)
        fit.spec = spec
    else:
        fit = fit_regression_curve(completed, spec)
    fit.diagnostics = trace
    return fit


class AgingCurveEstimator(BaseEstimator):
    """Mean aging curve estimator.

    Parameters
    ----------
    spec : str, default="spline:obs:fixed"
        One of the ``method:data:effects`` presets, or ``"delta-plus"``.
    spline_df : int, default=6
    boundary_quantile : float, default=0.75
        Imputation cap quantile; also the anchor quantile for ``quant``.
    t_min : int, default=18
        Age of the first column when ``X`` is a plain array.
    pool_size : int, optional
        Observable pool size for the quantile estimator (default: rows of X).
    random_state : int, Generator or None
        Seeds the imputation draws.

    Attributes
    ----------
    curve_ : AgeCurve
    fit_result_ : FitResult
    ages_ : ndarray
    """

    def __init__(self, spec="spline:obs:fixed", spline_df=6, boundary_quantile=0.75,
                 t_min=18, pool_size=None, random_state=None):
        self.spec = spec
        self.spline_df = spline_df
        self.boundary_quantile = boundary_quantile
        self.t_min = t_min
        self.pool_size = pool_size
        self.random_state = random_state

    def fit(self, X, y=None):
        """Fit on a panel (or ``N x K`` array with ``NaN`` for unobserved cells)."""
        panel = check_panel(X, self.t_min)
        spec = check_spec(self.spec, spline_df=self.spline_df,
                          boundary_quantile=self.boundary_quantile)
        self.fit_result_ = estimate(panel, spec, self.pool_size, check_rng(self.random_state))
        self.curve_ = self.fit_result_.curve
        self.ages_ = self.curve_.ages
        self.n_features_in_ = panel.grid.K
        return self

    def predict(self, ages=None):
        """Curve values at integer ``ages`` on the fitted grid (default: all)."""
        check_is_fitted(self, "curve_")
        if ages is None:
            return np.array(self.curve_.g)
        ages = np.asarray(ages)
        if ages.ndim == 2 and ages.shape[1] == 1:
            ages = ages[:, 0]
        grid = self.curve_.grid
        if np.any((ages < grid.t_min) | (ages > grid.t_max) | (ages != np.round(ages))):
            raise InvalidParameterError(
                f"ages must be integers within {grid.t_min}..{grid.t_max}"
            )
        return self.curve_.g[ages.astype(int) - grid.t_min]

    @property
    def residual_sd_(self):
        check_is_fitted(self, "fit_result_")
        return self.fit_result_.residual_sd

    @property
    def effects_(self):
        check_is_fitted(self, "fit_result_")
        return self.fit_result_.effects
