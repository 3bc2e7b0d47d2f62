"""Spline and quadratic regression curves with optional player terms.

Fixed intercepts are handled by within-player demeaning, which gives the
same coefficients as the full dummy-variable regression without forming
an ``n x N`` design. Random effects are fitted as a ridge-penalised
(BLUP-equivalent) problem. The penalties start from a moment-matching pass
over unpenalised per-player fits and are refined by maximising the
restricted likelihood.
"""

from __future__ import annotations

from itertools import product

import numpy as np
from scipy import optimize

from ..exceptions import InsufficientDataError, SingularDesignError, SpecError
from ..numerics import least_squares_fit
from ..panel import AgeCurve, EstimatorSpec, FitResult, PerformancePanel, PlayerEffects
from ..splines import natural_spline_basis, spline_knots

VARIANCE_FLOOR = 1e-8
LOG_PENALTY_BOUNDS = (np.log(1e-6), np.log(1e8))
REML_GRID = (-4.0, 0.0, 4.0, 8.0)


def age_design(panel: PerformancePanel, spec: EstimatorSpec, ages=None):
    """Design for the population curve evaluated on the full grid (``K x p``).

    Column 0 is always the constant. Spline knots come from ``ages``
    (default: the ages of all observed cells).
    """
    grid = panel.grid
    if spec.method == "quad":
        t = grid.ages.astype(float)
        return np.column_stack([np.ones_like(t), t, t * t])
    if spec.method != "spline":
        raise SpecError(f"{spec.name} is not a regression method")
    if ages is None:
        _, cols, _ = panel.observed_cells()
        ages = grid.ages[cols]
    knots = spline_knots(ages, spec.spline_df, grid)
    return natural_spline_basis(grid.ages, spec.spline_df, grid, knots=knots)


def fit_regression_curve(panel: PerformancePanel, spec: EstimatorSpec) -> FitResult:
    """Fit ``g(t)`` (spline or quadratic) plus the player terms named by
    ``spec.effects`` to the observed cells of ``panel``."""
    if spec.method not in ("spline", "quad"):
        raise SpecError(f"{spec.name} is not a spline or quad model")
    rows, cols, y = panel.observed_cells()
    if y.size < spec.spline_df + 2:
        raise InsufficientDataError(
            f"{y.size} observed cells; at least {spec.spline_df + 2} required"
        )
    Bg = age_design(panel, spec)
    if spec.effects == "none":
        return _fit_no_effects(panel, spec, Bg, rows, cols, y)
    if spec.effects == "fixed":
        return _fit_fixed(panel, spec, Bg, rows, cols, y)
    if spec.effects in ("random-quad", "random-spline"):
        return _fit_random(panel, spec, Bg, rows, cols, y)
    raise SpecError(f"unknown effects kind {spec.effects!r}")


def _fit_no_effects(panel, spec, Bg, rows, cols, y):
    ls = least_squares_fit(Bg[cols], y)
    g = Bg @ ls.coef
    fitted = np.broadcast_to(g, panel.shape).copy()
    return FitResult(
        AgeCurve(panel.grid, g, panel.observed_count()),
        PlayerEffects.none(panel.n_players),
        ls.residual_sd,
        spec,
        fitted=fitted,
        age_coef=ls.coef,
    )


def _within(Bg, rows, cols, y, n_players):
    """Player means of the response and design, and the demeaned versions."""
    n_obs = np.bincount(rows, minlength=n_players)
    safe = np.maximum(n_obs, 1)
    ybar = np.bincount(rows, weights=y, minlength=n_players) / safe
    X = Bg[cols]
    Xbar = np.column_stack(
        [np.bincount(rows, weights=X[:, j], minlength=n_players) for j in range(X.shape[1])]
    ) / safe[:, None]
    return n_obs, ybar, Xbar, X - Xbar[rows], y - ybar[rows]


def fixed_effects_fit(Bg, rows, cols, y, n_players):
    """Sum-to-zero player intercepts plus age coefficients.

    Returns ``(age_coef, intercepts, residual_sd, residuals)``; players
    without observations get intercept 0 and are excluded from the
    sum-to-zero constraint.
    """
    n_obs, ybar, Xbar, Xw, yw = _within(Bg, rows, cols, y, n_players)
    seen = n_obs > 0
    n_seen = int(seen.sum())
    p = Bg.shape[1]
    dof = y.size - (p - 1) - n_seen
    if dof < 1:
        raise InsufficientDataError(
            f"{y.size} observations cannot support {p - 1} age terms and {n_seen} players"
        )
    ls = least_squares_fit(Xw[:, 1:], yw, ridge=True)
    beta = np.concatenate([[0.0], ls.coef])
    alpha = np.where(seen, ybar - Xbar @ beta, 0.0)
    centre = alpha[seen].mean()
    beta[0] = centre
    intercepts = np.where(seen, alpha - centre, 0.0)
    resid = y - Bg[cols] @ beta - intercepts[rows]
    sd = float(np.sqrt(resid @ resid / dof))
    return beta, intercepts, sd, resid


def _fit_fixed(panel, spec, Bg, rows, cols, y):
    beta, intercepts, sd, _ = fixed_effects_fit(Bg, rows, cols, y, panel.n_players)
    g = Bg @ beta
    fitted = g[None, :] + intercepts[:, None]
    return FitResult(
        AgeCurve(panel.grid, g, panel.observed_count()),
        PlayerEffects("fixed", intercepts),
        sd,
        spec,
        fitted=fitted,
        age_coef=beta,
    )


def _random_design(panel, spec, Bg):
    if spec.effects == "random-spline":
        return Bg, 0.0, 1.0
    t = panel.grid.ages.astype(float)
    centre = 0.5 * (t[0] + t[-1])
    scale = 0.5 * (t[-1] - t[0])
    u = (t - centre) / scale
    return np.column_stack([np.ones_like(u), u, u * u]), centre, scale


def _per_player_ols(Zg, W, R, min_obs):
    """Unpenalised per-player regressions of residual rows ``R`` on ``Zg``.

    Returns coefficients, the diagonal of ``(Z_i' Z_i)^{-1}`` and residual
    sums of squares for players with at least ``min_obs`` observations.
    """
    n_obs = W.sum(axis=1)
    keep = np.flatnonzero(n_obs >= min_obs)
    coefs, inv_diag, rss, dof = [], [], [], []
    for i in keep:
        Zi = Zg[W[i]]
        ri = R[i, W[i]]
        gram = Zi.T @ Zi
        try:
            gram_inv = np.linalg.inv(gram)
        except np.linalg.LinAlgError:
            continue
        if not np.all(np.isfinite(gram_inv)) or np.linalg.cond(gram) > 1e12:
            continue
        c = gram_inv @ (Zi.T @ ri)
        e = ri - Zi @ c
        coefs.append(c)
        inv_diag.append(np.diag(gram_inv))
        rss.append(e @ e)
        dof.append(Zi.shape[0] - Zi.shape[1])
    if len(coefs) < 2:
        raise InsufficientDataError(
            "random effects need at least two players with enough observations"
        )
    return np.array(coefs), np.array(inv_diag), float(np.sum(rss)), float(np.sum(dof))


def random_effect_penalty(Bg, Zg, panel):
    """Moment-matched ridge penalties (one per random-effect column).

    The unpenalised spread of per-player coefficients, minus its expected
    sampling noise, estimates each effect variance; the penalty is the
    noise variance over that effect variance.
    """
    rows, cols, y = panel.observed_cells()
    beta, _, _, _ = fixed_effects_fit(Bg, rows, cols, y, panel.n_players)
    R = np.full(panel.shape, np.nan)
    R[rows, cols] = y - Bg[cols] @ beta
    p = Zg.shape[1]
    coefs, inv_diag, rss, dof = _per_player_ols(Zg, panel.mask, R, p + 1)
    sigma2 = rss / dof
    spread = coefs.var(axis=0, ddof=1)
    noise = sigma2 * inv_diag.mean(axis=0)
    effect_var = np.maximum(spread - noise, VARIANCE_FLOOR + 1e-6 * spread)
    return sigma2 / effect_var, coefs, sigma2


class _PenalisedProblem:
    """Cross-products of a random-effects regression that do not depend on
    the penalty, cached for repeated solves."""

    def __init__(self, Bg, Zg, W, Y):
        self.Bg, self.Zg, self.W = Bg, Zg, W
        Wf = W.astype(float)
        self.Yz = np.where(W, Y, 0.0)
        self.C = np.einsum("ik,kd,ke->de", Wf, Bg, Bg)
        self.A = np.einsum("ik,kd,ke->ide", Wf, Bg, Zg)
        self.ZZ = np.einsum("ik,kd,ke->ide", Wf, Zg, Zg)
        self.by = np.einsum("ik,kd->d", self.Yz, Bg)
        self.zy = np.einsum("ik,kd->id", self.Yz, Zg)
        self.yy = float(np.sum(self.Yz**2))
        self.seen = W.any(axis=1)
        self.n = int(W.sum())

    def solve(self, penalty):
        M = self.ZZ + np.diag(penalty)[None, :, :]
        Minv = np.linalg.inv(M)
        AMinv = np.einsum("ide,ief->idf", self.A, Minv)
        S = self.C - np.einsum("idf,igf->dg", AMinv, self.A)
        r = self.by - np.einsum("idf,if->d", AMinv, self.zy)
        try:
            beta = np.linalg.solve(S, r)
        except np.linalg.LinAlgError as exc:
            raise SingularDesignError("penalised normal equations are singular") from exc
        U = np.einsum("ief,if->ie", Minv, self.zy - np.einsum("ide,d->ie", self.A, beta))
        return beta, U, M, Minv, S

    def penalised_rss(self, beta, U, penalty):
        """``||y - B beta - Z u||^2 + sum u' diag(penalty) u``, from the residuals
        (the shorter closed form cancels badly and makes the likelihood noisy)."""
        resid = np.where(self.W, self.Yz - self.Bg @ beta - U @ self.Zg.T, 0.0)
        return float(np.sum(resid**2) + np.sum(U[self.seen] ** 2 * penalty))


def penalised_fit(Bg, Zg, W, Y, penalty):
    """Solve ``min ||y - B beta - Z u_i||^2 + sum_i u_i' diag(penalty) u_i``.

    ``W`` is the ``N x K`` observation mask and ``Y`` the panel values
    (unobserved cells ignored). The block structure is eliminated player by
    player, so cost is linear in the number of players.

    Returns ``(beta, U, effective_dof)``.
    """
    prob = _PenalisedProblem(Bg, Zg, W, Y)
    beta, U, _, Minv, _ = prob.solve(penalty)
    edf = float(np.einsum("ide,ied->", prob.ZZ, Minv))
    return beta, U, edf


def restricted_loglik(log_penalty, problem: _PenalisedProblem):
    """Profiled REML log-likelihood of the penalties (noise-to-effect
    variance ratios), up to a constant."""
    penalty = np.exp(log_penalty)
    beta, U, M, _, S = problem.solve(penalty)
    rss = problem.penalised_rss(beta, U, penalty)
    dof = problem.n - problem.Bg.shape[1]
    if not rss > 0:
        return -np.inf
    _, logdet_m = np.linalg.slogdet(M[problem.seen])
    logdet_v = float(np.sum(logdet_m) - problem.seen.sum() * np.sum(log_penalty))
    _, logdet_s = np.linalg.slogdet(S)
    return -0.5 * (dof * np.log(rss / dof) + logdet_v + logdet_s)


def reml_penalty(Bg, Zg, W, Y, start=None, groups=None):
    """Penalties maximising the restricted likelihood.

    ``W`` is the observation mask and ``Y`` the panel values. ``groups``
    maps each effect column to a shared penalty (default: one per column);
    ``start`` is per column and is averaged on the log scale within groups.
    """
    p = Zg.shape[1]
    groups = np.arange(p) if groups is None else np.asarray(groups)
    n_groups = int(groups.max()) + 1
    x0 = np.zeros(n_groups)
    if start is not None:
        logs = np.log(np.asarray(start, dtype=float))
        x0 = np.array([logs[groups == j].mean() for j in range(n_groups)])
    x0 = np.clip(x0, *LOG_PENALTY_BOUNDS)
    problem = _PenalisedProblem(Bg, Zg, W, Y)

    def objective(x):
        try:
            return -restricted_loglik(x[groups], problem)
        except (SingularDesignError, np.linalg.LinAlgError):
            return np.inf

    # the likelihood can be flat towards infinite penalties, so polish from
    # both the moment start and the best point of a coarse grid
    coarse = np.array(list(product(REML_GRID, repeat=n_groups)))
    best_coarse = coarse[np.argmin([objective(x) for x in coarse])]
    best = None
    for x in (x0, best_coarse):
        res = optimize.minimize(objective, x, method="L-BFGS-B", jac="3-point",
                                bounds=[LOG_PENALTY_BOUNDS] * n_groups,
                                options={"ftol": 1e-13, "gtol": 1e-9})
        if best is None or res.fun < best.fun:
            best = res
    return np.exp(best.x[groups])


def _fit_random(panel, spec, Bg, rows, cols, y):
    Zg, centre, scale = _random_design(panel, spec, Bg)
    start, _, _ = random_effect_penalty(Bg, Zg, panel)
    # centring makes the fit exactly shift-equivariant; column 0 takes the mean back
    ybar = float(y.mean())
    Yc = panel.values - ybar
    # random-spline: one variance for the player level, one shared by the shape terms
    groups = np.minimum(np.arange(Zg.shape[1]), 1) if spec.effects == "random-spline" else None
    penalty = reml_penalty(Bg, Zg, panel.mask, Yc, start, groups)
    beta, U, edf = penalised_fit(Bg, Zg, panel.mask, Yc, penalty)
    beta = beta.copy()
    beta[0] += ybar
    seen = panel.mask.any(axis=1)
    ubar = U[seen].mean(axis=0)
    U = np.where(seen[:, None], U - ubar, 0.0)
    g = Bg @ beta + Zg @ ubar
    fitted = g[None, :] + U @ Zg.T
    resid = y - fitted[rows, cols]
    dof = max(y.size - Bg.shape[1] - edf, 1.0)
    sd = float(np.sqrt(resid @ resid / dof))
    if spec.effects == "random-quad":
        effects = PlayerEffects("random-quad", U[:, 0], U[:, 1], U[:, 2],
                                age_centre=centre, age_scale=scale)
    else:
        effects = PlayerEffects("random-spline", U[:, 0], spline_coeffs=U)
    return FitResult(
        AgeCurve(panel.grid, g, panel.observed_count()),
        effects,
        sd,
        spec,
        fitted=fitted,
        age_coef=beta,
        diagnostics={"penalty": penalty},
    )
