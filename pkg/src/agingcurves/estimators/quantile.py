"""Quantile-mapping estimate of the population mean at each age.

Observed players at an age are treated as the top ``n_t / N_t`` of a
Normal population. The observed ``q`` quantile is mapped to the population
percentile ``G_t``, the observed SD is inflated for truncation, and the
population mean is backed out.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import InsufficientDataError, InvalidParameterError
from ..numerics import sample_quantile, std_normal_quantile, truncated_sd_ratio
from ..panel import AgeCurve, PerformancePanel


@dataclass(frozen=True)
class QuantileDiagnostics:
    nu: np.ndarray
    big_G: np.ndarray
    theta: np.ndarray
    s_obs: np.ndarray
    sigma_hat: np.ndarray
    zeta: np.ndarray
    pool_size: int


def population_percentile(n_obs, pool_size, q):
    """``G = 1 - (n_obs / pool_size) * (1 - q)``."""
    return 1.0 - (np.asarray(n_obs, dtype=float) / pool_size) * (1.0 - q)


def truncation_point(n_obs, pool_size):
    """Standard-Normal lower cut implied by keeping the top ``n_obs / pool_size``.

    ``-inf`` when every pool member is observed.
    """
    frac = np.asarray(n_obs, dtype=float) / pool_size
    out = np.full(frac.shape, -np.inf)
    part = frac < 1.0
    if np.any(part):
        out[part] = std_normal_quantile(1.0 - frac[part])
    return out if out.ndim else float(out)


def quantile_curve(panel: PerformancePanel, pool_size: int = None, q: float = 0.75):
    """Population-mean curve from per-age observed quantiles.

    Parameters
    ----------
    panel : PerformancePanel
    pool_size : int, optional
        Number of players observable at each age; defaults to the number of
        players in the panel.
    q : float
        Quantile of the observed values used as the anchor.

    Returns
    -------
    (AgeCurve, QuantileDiagnostics)
    """
    if not 0.0 < q < 1.0:
        raise InvalidParameterError(f"q must lie strictly between 0 and 1, got {q}")
    N = panel.n_players if pool_size is None else int(pool_size)
    counts = panel.observed_count()
    ages = panel.grid.ages
    if np.any(counts > N):
        t = ages[np.argmax(counts > N)]
        raise InvalidParameterError(
            f"age {t}: {counts.max()} observed players exceed pool size {N}"
        )
    if np.any(counts < 2):
        t = ages[np.argmax(counts < 2)]
        raise InsufficientDataError(f"age {t}: at least 2 observations are required")

    K = panel.grid.K
    nu = np.array([sample_quantile(panel.observed_column(k), q) for k in range(K)])
    s_obs = np.array([np.std(panel.observed_column(k), ddof=1) for k in range(K)])
    G = population_percentile(counts, N, q)
    theta = truncated_sd_ratio(truncation_point(counts, N))
    sigma_hat = s_obs / theta
    zeta = nu - std_normal_quantile(G) * sigma_hat
    diag = QuantileDiagnostics(nu, G, theta, s_obs, sigma_hat, zeta, N)
    return AgeCurve(panel.grid, zeta, counts), diag
