"""Shared numerical routines: age grids, least squares, Normal and
truncated-Normal helpers, and sample quantiles."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np
from scipy import special

from .exceptions import (
    GridError,
    InsufficientDataError,
    InvalidParameterError,
    SingularDesignError,
)

RIDGE_EPS = 1e-8
TAIL_SWITCH = 5.0
TAIL_TERMS = 80


@dataclass(frozen=True)
class AgeGrid:
    """Inclusive range of integer ages ``t_min..t_max``."""

    t_min: int = 18
    t_max: int = 40

    def __post_init__(self):
        if int(self.t_min) != self.t_min or int(self.t_max) != self.t_max:
            raise GridError("grid ends must be integers")
        if self.t_min >= self.t_max:
            raise GridError(f"t_min ({self.t_min}) must be < t_max ({self.t_max})")
        object.__setattr__(self, "t_min", int(self.t_min))
        object.__setattr__(self, "t_max", int(self.t_max))

    @property
    def K(self) -> int:
        return self.t_max - self.t_min + 1

    @property
    def ages(self) -> np.ndarray:
        return np.arange(self.t_min, self.t_max + 1)

    def __iter__(self) -> Iterator[int]:
        return iter(range(self.t_min, self.t_max + 1))

    def __len__(self) -> int:
        return self.K

    def __contains__(self, age) -> bool:
        return self.t_min <= age <= self.t_max and float(age).is_integer()

    def index(self, age: int) -> int:
        if age not in self:
            raise GridError(f"age {age} not on grid {self.t_min}..{self.t_max}")
        return int(age) - self.t_min


class LeastSquaresResult(NamedTuple):
    coef: np.ndarray
    residual_sd: float
    residuals: np.ndarray
    ridge_applied: bool


def least_squares_fit(design, response, ridge: bool = False) -> LeastSquaresResult:
    """Ordinary least squares with an optional tiny-ridge fallback.

    Parameters
    ----------
    design : array-like, shape (n, p)
    response : array-like, shape (n,)
    ridge : bool
        When the design is rank deficient, add ``1e-8`` (relative to the
        mean diagonal of the Gram matrix) to the diagonal instead of raising.

    Returns
    -------
    LeastSquaresResult
        ``residual_sd`` uses denominator ``n - p``; it is 0 when ``n == p``.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise InvalidParameterError(
            f"design {X.shape} and response {y.shape} are incompatible"
        )
    n, p = X.shape
    if n < p:
        raise InsufficientDataError(f"{n} rows cannot identify {p} coefficients")
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    ridge_applied = False
    if rank < p:
        if not ridge:
            raise SingularDesignError(f"design has rank {rank} < {p} columns")
        gram = X.T @ X
        bump = RIDGE_EPS * max(np.mean(np.diag(gram)), 1.0)
        coef = np.linalg.solve(gram + bump * np.eye(p), X.T @ y)
        ridge_applied = True
    resid = y - X @ coef
    dof = n - p
    sd = float(np.sqrt(resid @ resid / dof)) if dof > 0 else 0.0
    return LeastSquaresResult(coef, sd, resid, ridge_applied)


def std_normal_cdf(z):
    """Standard Normal CDF."""
    return special.ndtr(z)


def std_normal_quantile(p):
    """Inverse of :func:`std_normal_cdf` on the open interval (0, 1)."""
    arr = np.asarray(p, dtype=float)
    if np.any(~((arr > 0) & (arr < 1))):
        raise InvalidParameterError("quantile requires 0 < p < 1")
    out = special.ndtri(arr)
    return out if out.ndim else float(out)


def std_normal_pdf(z):
    return np.exp(-0.5 * np.square(z)) / np.sqrt(2.0 * np.pi)


def truncated_normal_sample(mean, sd, upper, rng, size=None):
    """Draw from Normal(mean, sd^2) restricted to values <= ``upper``.

    Uses the inverse CDF on a uniform draw confined to
    ``[0, Phi((upper - mean) / sd)]``, evaluated in log space so that
    boundaries many standard deviations below the mean stay finite.
    ``upper`` may be ``+inf`` (plain Normal). Arguments broadcast.
    """
    mean = np.asarray(mean, dtype=float)
    sd = np.asarray(sd, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if np.any(~(sd > 0)):
        raise InvalidParameterError("truncated normal requires sd > 0")
    shape = np.broadcast_shapes(mean.shape, sd.shape, upper.shape)
    if size is not None:
        shape = np.broadcast_shapes(shape, (size,) if np.isscalar(size) else tuple(size))
    # 1 - U lies in (0, 1], so the log is finite
    log_u = np.log1p(-rng.random(shape))
    b = (upper - mean) / sd
    z = special.ndtri_exp(log_u + special.log_ndtr(b))
    draws = mean + sd * z
    draws = np.minimum(draws, upper)
    return draws if draws.ndim else float(draws)


def truncated_sd_ratio(lower_z):
    """SD of a standard Normal truncated below at ``lower_z``.

    ``theta = sqrt(1 + z*lam - lam**2)`` with the inverse Mills ratio
    ``lam = phi(z) / (1 - Phi(z))``. Equals 1 at ``-inf``.
    """
    z = np.asarray(lower_z, dtype=float)
    with np.errstate(invalid="ignore", over="ignore"):
        # log-space Mills ratio; 1 - Phi(z) = Phi(-z)
        lam = np.exp(-0.5 * z * z - 0.5 * np.log(2 * np.pi) - special.log_ndtr(-z))
        var = 1.0 + z * lam - lam * lam
    var = np.where(np.isneginf(z), 1.0, var)
    far = np.isfinite(z) & (z > TAIL_SWITCH)
    if np.any(far):
        var = np.where(far, _right_tail_variance(np.where(far, z, TAIL_SWITCH + 1.0)), var)
    theta = np.sqrt(np.clip(var, 0.0, 1.0))
    return theta if theta.ndim else float(theta)


def _right_tail_variance(z):
    """``1 + z lam - lam^2`` for large ``z`` without cancellation.

    With the Mills-ratio continued fraction ``lam = z + c``,
    ``c = 1 / (z + d)``, ``d = 2 / (z + 3 / (z + ...))``, the variance is
    ``c^2 (d (z + d) - 1)``, a difference of well-separated terms.
    """
    d = np.zeros_like(z)
    for k in range(TAIL_TERMS, 1, -1):
        d = k / (z + d)
    c = 1.0 / (z + d)
    return c * c * (d * (z + d) - 1.0)


def sample_quantile(values, q):
    """Linear-interpolation quantile (order statistic ``h = q(n-1) + 1``)."""
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise InsufficientDataError("sample_quantile of an empty sample")
    if not 0.0 <= q <= 1.0:
        raise InvalidParameterError(f"q must lie in [0, 1], got {q}")
    return float(np.quantile(arr, q, method="linear"))
