"""Two-pass imputation of unobserved performance values.

The mean model is fitted on observed cells; missing cells are drawn from
Normal(fitted mean, sigma_0^2), optionally capped above by a smoothed
per-age quantile of the observed values. The model is refitted on the
completed panel and the originally missing cells are drawn again from the
refitted means. The residual SD and the cap are fixed after the first fit.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .estimators.quantile import quantile_curve
from .estimators.regression import fit_regression_curve
from .exceptions import InsufficientDataError, InvalidParameterError, SpecError
from .numerics import least_squares_fit, sample_quantile, truncated_normal_sample
from .panel import EstimatorSpec, PerformancePanel
from .splines import natural_spline_basis
from .validation import check_panel, check_rng

PASSES = 2


@dataclass(frozen=True)
class ImputationConfig:
    boundary_quantile: float = 0.75
    truncate: bool = True
    passes: int = PASSES
    mean_source: str = "regression"
    spline_df: int = 6

    def __post_init__(self):
        if not 0.0 < self.boundary_quantile < 1.0:
            raise InvalidParameterError("boundary_quantile must lie strictly in (0, 1)")
        if self.passes != PASSES:
            raise InvalidParameterError("the algorithm uses exactly two passes")
        if self.mean_source not in ("regression", "quantile"):
            raise InvalidParameterError(f"unknown mean_source {self.mean_source!r}")

    @classmethod
    def for_spec(cls, spec: EstimatorSpec) -> "ImputationConfig":
        if spec.data == "obs":
            raise SpecError(f"{spec.name} does not impute")
        return cls(
            boundary_quantile=spec.boundary_quantile,
            truncate=spec.data == "trunc",
            mean_source="quantile" if spec.method == "quant" else "regression",
            spline_df=spec.spline_df,
        )


@dataclass(frozen=True)
class ImputationTrace:
    """Per-missing-cell record of one imputation run.

    Cell arrays follow the row-major order of ``np.nonzero(~original_mask)``.
    """

    original_mask: np.ndarray
    boundary: np.ndarray
    first_pass_means: np.ndarray
    second_pass_means: np.ndarray
    imputed: np.ndarray
    sigma0: float
    first_pass_imputed: np.ndarray = None

    @property
    def missing_cells(self):
        return np.nonzero(~self.original_mask)


def smoothed_boundary(panel: PerformancePanel, q: float = 0.75, df: int = 6) -> np.ndarray:
    """Spline-smoothed per-age ``q`` quantile of the observed values."""
    if not 0.0 < q < 1.0:
        raise InvalidParameterError(f"q must lie strictly in (0, 1), got {q}")
    counts = panel.observed_count()
    if np.any(counts == 0):
        t = panel.grid.ages[np.argmax(counts == 0)]
        raise InsufficientDataError(f"boundary undefined: no observations at age {t}")
    ages = panel.grid.ages
    quantiles = np.array([sample_quantile(panel.observed_column(k), q)
                          for k in range(panel.grid.K)])
    B = natural_spline_basis(ages, min(df, panel.grid.K), panel.grid)
    return B @ least_squares_fit(B, quantiles).coef


def _mean_model(panel, spec, config, zeta):
    """Fitted means for every cell (``N x K``) and the fit's residual SD."""
    if config.mean_source == "quantile":
        fit = fit_regression_curve(panel, _fixed_spline(spec))
        return zeta[None, :] + fit.effects.intercepts[:, None], fit.residual_sd
    fit = fit_regression_curve(panel, replace(spec, data="obs", custom=True))
    return fit.fitted, fit.residual_sd


def _fixed_spline(spec):
    return EstimatorSpec("spline", "obs", "fixed", spline_df=spec.spline_df,
                         boundary_quantile=spec.boundary_quantile)


def impute_panel(panel: PerformancePanel, spec: EstimatorSpec,
                 config: ImputationConfig = None, rng=None, pool_size=None):
    """Complete ``panel`` by two rounds of (truncated) Normal draws.

    Parameters
    ----------
    panel : PerformancePanel
    spec : EstimatorSpec
        Selects the mean model. With ``mean_source="quantile"`` the means
        are the quantile-mapped curve plus fixed player intercepts.
    config : ImputationConfig, optional
        Derived from ``spec`` when omitted.
    rng : numpy Generator or int seed
    pool_size : int, optional
        Observable pool size for the quantile mean source.

    Returns
    -------
    (PerformancePanel, ImputationTrace)
        The completed panel is fully observed; observed cells are unchanged.
    """
    if config is None:
        config = ImputationConfig.for_spec(spec)
    rng = check_rng(rng)
    missing = ~panel.mask
    rows, cols = np.nonzero(missing)
    K = panel.grid.K
    if rows.size == 0:
        empty = np.empty(0)
        bound = np.full(K, np.inf)
        return panel, ImputationTrace(panel.mask.copy(), bound, empty, empty, empty, 0.0, empty)

    zeta = None
    if config.mean_source == "quantile":
        zeta = quantile_curve(panel, pool_size, config.boundary_quantile)[0].g

    means1, sigma0 = _mean_model(panel, spec, config, zeta)
    if config.truncate:
        boundary = smoothed_boundary(panel, config.boundary_quantile, config.spline_df)
    else:
        boundary = np.full(K, np.inf)

    first = means1[rows, cols]
    first_draws = _draw(first, sigma0, boundary[cols], rng)
    full = panel.values.copy()
    full[rows, cols] = first_draws
    completed = PerformancePanel(panel.grid, full, np.ones_like(panel.mask), panel.player_ids)

    means2, _ = _mean_model(completed, spec, config, zeta)
    second = means2[rows, cols]
    draws = _draw(second, sigma0, boundary[cols], rng)
    full[rows, cols] = draws
    completed = PerformancePanel(panel.grid, full, np.ones_like(panel.mask), panel.player_ids)
    trace = ImputationTrace(panel.mask.copy(), boundary, first, second, draws, sigma0,
                            first_draws)
    return completed, trace


def _draw(means, sigma0, upper, rng):
    if sigma0 <= 0:
        # degenerate fit: the Normal collapses onto its mean
        return np.minimum(means, np.nextafter(upper, -np.inf))
    out = truncated_normal_sample(means, sigma0, upper, rng)
    return np.minimum(out, np.nextafter(upper, -np.inf))


class PanelImputer(TransformerMixin, BaseEstimator):
    """Transformer wrapper around :func:`impute_panel`.

    ``transform`` accepts a :class:`PerformancePanel` or an ``N x K`` array
    with ``NaN`` for unobserved cells and returns the completed array.
    The last trace is kept in ``trace_``.
    """

    def __init__(self, spec="spline:trunc:fixed", truncate=None, boundary_quantile=0.75,
                 spline_df=6, t_min=18, pool_size=None, random_state=None):
        self.spec = spec
        self.truncate = truncate
        self.boundary_quantile = boundary_quantile
        self.spline_df = spline_df
        self.t_min = t_min
        self.pool_size = pool_size
        self.random_state = random_state

    def fit(self, X, y=None):
        self.spec_ = EstimatorSpec.parse(str(self.spec), spline_df=self.spline_df,
                                         boundary_quantile=self.boundary_quantile)
        config = ImputationConfig.for_spec(self.spec_)
        if self.truncate is not None:
            config = replace(config, truncate=bool(self.truncate))
        self.config_ = config
        panel = check_panel(X, self.t_min)
        self.n_features_in_ = panel.grid.K
        return self

    def transform(self, X):
        panel = check_panel(X, self.t_min)
        completed, self.trace_ = impute_panel(panel, self.spec_, self.config_,
                                              check_rng(self.random_state), self.pool_size)
        return np.array(completed.values)
