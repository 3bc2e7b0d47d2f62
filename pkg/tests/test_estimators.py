import numpy as np
import pytest

from agingcurves import (AgeGrid, EstimatorSpec, PerformancePanel, delta_curve,
                         delta_plus_curve, estimate, fit_regression_curve, presets,
                         quantile_curve)
from agingcurves.estimators.quantile import population_percentile, truncation_point
from agingcurves.estimators.regression import age_design
from agingcurves.exceptions import InsufficientDataError, InvalidParameterError, SpecError
from agingcurves.numerics import least_squares_fit, std_normal_quantile
from agingcurves.panel import apply_affine

SPLINE_FIXED = EstimatorSpec.parse("spline:obs:fixed")


def random_panel(seed, n=40, grid=AgeGrid(18, 30), p_obs=0.6):
    r = np.random.default_rng(seed)
    values = r.normal(size=(n, grid.K)) + r.normal(size=(n, 1))
    mask = r.random((n, grid.K)) < p_obs
    mask[:, :2] = True  # every age pair co-observed somewhere
    return PerformancePanel(grid, values, mask)


class TestDelta:
    def test_hand_example(self):
        p = PerformancePanel(AgeGrid(20, 22), [[1.0, 2.0, 1.5]])
        curve, diag = delta_curve(p)
        np.testing.assert_allclose(diag.deltas, [1.0, -0.5])
        np.testing.assert_allclose(curve.g, [-1.0, 0.0, -0.5])

    def test_duplicate_players(self):
        row = [0.3, 1.1, 0.4, -0.2]
        p = PerformancePanel(AgeGrid(20, 23), [row, row])
        np.testing.assert_allclose(delta_curve(p)[1].deltas, np.diff(row))

    def test_pair_counts_and_means(self):
        p = random_panel(1)
        _, diag = delta_curve(p)
        both = p.mask[:, :-1] & p.mask[:, 1:]
        np.testing.assert_array_equal(diag.pair_counts, both.sum(0))
        assert np.all(diag.pair_counts <= np.minimum(p.observed_count()[:-1],
                                                     p.observed_count()[1:]))
        for k in range(p.grid.K - 1):
            sel = both[:, k]
            assert diag.deltas[k] == pytest.approx(
                np.mean(p.values[sel, k + 1] - p.values[sel, k]))

    def test_peak_is_zero_and_shift_invariant(self):
        p = random_panel(2)
        c = delta_curve(p)[0]
        assert c.g.max() == 0.0
        np.testing.assert_allclose(delta_curve(apply_affine(p, 1, 4.2))[0].g, c.g, atol=1e-12)

    def test_plus_is_constant_shift(self):
        p = random_panel(3)
        base, diag = delta_curve(p)
        plus = delta_plus_curve(p)[0]
        top = max(p.observed_column(k).mean() for k in range(p.grid.K))
        np.testing.assert_allclose(plus.g - base.g, top, atol=1e-12)
        assert plus.g.max() == pytest.approx(top, abs=1e-12)
        np.testing.assert_allclose(diag.observed_means,
                                   [p.observed_column(k).mean() for k in range(p.grid.K)])

    def test_plus_flat_and_equivariant(self):
        flat = PerformancePanel(AgeGrid(20, 25), np.full((3, 6), 3.0))
        np.testing.assert_allclose(delta_plus_curve(flat)[0].g, 3.0)
        p = random_panel(4)
        np.testing.assert_allclose(delta_plus_curve(apply_affine(p, 1, -2.0))[0].g,
                                   delta_plus_curve(p)[0].g - 2.0, atol=1e-12)

    def test_missing_pair_names_age(self):
        mask = np.ones((3, 4), bool)
        mask[:, 2] = False
        mask[0, 2] = True
        mask[0, 3] = False
        p = PerformancePanel(AgeGrid(20, 23), np.zeros((3, 4)), mask)
        with pytest.raises(InsufficientDataError, match="age 22"):
            delta_curve(p)


class TestQuantile:
    def test_worked_percentiles(self):
        assert population_percentile(400, 1000, 0.75) == pytest.approx(0.90, abs=1e-15)
        assert population_percentile(400, 1000, 0.25) == pytest.approx(0.70, abs=1e-15)

    def test_full_pool_median(self):
        p = random_panel(5, p_obs=1.0)
        curve, diag = quantile_curve(p, q=0.5)
        np.testing.assert_allclose(diag.big_G, 0.5)
        np.testing.assert_allclose(diag.theta, 1.0)
        np.testing.assert_allclose(curve.g, np.median(p.values, axis=0), atol=1e-12)

    def test_internals_match_closed_forms(self):
        p = random_panel(6)
        N = 55
        curve, d = quantile_curve(p, pool_size=N, q=0.75)
        n = p.observed_count()
        np.testing.assert_allclose(d.big_G, 1 - (n / N) * 0.25, rtol=0, atol=1e-15)
        assert np.all((d.big_G >= 0.75) & (d.big_G <= 1))
        z = std_normal_quantile(1 - n / N)
        np.testing.assert_allclose(truncation_point(n, N), z)
        assert np.all(d.sigma_hat >= d.s_obs)
        np.testing.assert_allclose(
            curve.g, d.nu - std_normal_quantile(d.big_G) * d.s_obs / d.theta)
        k = 3
        col = p.observed_column(k)
        assert d.nu[k] == pytest.approx(np.quantile(col, 0.75))
        assert d.s_obs[k] == pytest.approx(col.std(ddof=1))

    def test_errors(self):
        p = random_panel(7)
        with pytest.raises(InvalidParameterError):
            quantile_curve(p, pool_size=5)
        mask = np.ones((4, 3), bool)
        mask[1:, 1] = False
        with pytest.raises(InsufficientDataError, match="age 19"):
            quantile_curve(PerformancePanel(AgeGrid(18, 20), np.zeros((4, 3)), mask))

    def test_shift_equivariance(self):
        p = random_panel(8)
        a, da = quantile_curve(p, q=0.75)
        b, db = quantile_curve(apply_affine(p, 1, 1.5), q=0.75)
        np.testing.assert_allclose(db.nu, da.nu + 1.5, atol=1e-12)
        np.testing.assert_allclose(b.g, a.g + 1.5, atol=1e-12)


def dummy_regression(panel, spec):
    """Oracle: explicit player-indicator least squares, centred afterwards."""
    rows, cols, y = panel.observed_cells()
    Bg = age_design(panel, spec)
    seen = np.unique(rows)
    D = (rows[:, None] == seen[None, :]).astype(float)
    X = np.column_stack([Bg[cols][:, 1:], D])
    coef = least_squares_fit(X, y).coef
    p = Bg.shape[1] - 1
    alpha = coef[p:]
    g = Bg[:, 1:] @ coef[:p] + alpha.mean()
    eff = np.zeros(panel.n_players)
    eff[seen] = alpha - alpha.mean()
    return g, eff


class TestRegression:
    def test_quadratic_exact(self):
        grid = AgeGrid(18, 40)
        t = grid.ages.astype(float)
        p = PerformancePanel(grid, np.tile(1 + 0.2 * t - 0.01 * t * t, (4, 1)))
        spec = EstimatorSpec("quad", "obs", "none", custom=True)
        fit = fit_regression_curve(p, spec)
        np.testing.assert_allclose(fit.age_coef, [1, 0.2, -0.01], atol=1e-8)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_fixed_matches_dummy_oracle(self, seed):
        p = random_panel(seed, n=25)
        for spec in (SPLINE_FIXED, EstimatorSpec("quad", "obs", "fixed", custom=True)):
            fit = fit_regression_curve(p, spec)
            g, eff = dummy_regression(p, spec)
            np.testing.assert_allclose(fit.curve.g, g, atol=1e-9)
            np.testing.assert_allclose(fit.effects.intercepts, eff, atol=1e-9)

    def test_fixed_intercepts_sum_to_zero_and_unseen_zero(self):
        p = random_panel(9)
        mask = p.mask.copy()
        mask[3] = False
        p = p.with_mask(mask)
        eff = fit_regression_curve(p, SPLINE_FIXED).effects.intercepts
        assert abs(eff.sum()) < 1e-10 and eff[3] == 0.0

    def test_noiseless_recovery(self):
        """A fully observed noiseless panel is fitted by the projection of g
        onto the spline space, with player constants recovered exactly."""
        grid = AgeGrid(18, 40)
        t = grid.ages.astype(float)
        g = -(t - 25) ** 2 / 9
        c = np.array([0.5, -1.0, 0.2, 0.3])
        p = PerformancePanel(grid, g[None, :] + c[:, None])
        fit = fit_regression_curve(p, SPLINE_FIXED)
        B = age_design(p, SPLINE_FIXED)
        proj = B @ np.linalg.solve(B.T @ B, B.T @ g)
        np.testing.assert_allclose(fit.curve.g, proj, atol=1e-9)
        np.testing.assert_allclose(fit.effects.intercepts, c - c.mean(), atol=1e-9)
        # a curve inside the spline space comes back exactly
        inside = B @ np.array([0.1, -2.0, 0.5, 0.3, -0.4, 0.2])
        p2 = PerformancePanel(grid, inside[None, :] + c[:, None])
        np.testing.assert_allclose(fit_regression_curve(p2, SPLINE_FIXED).curve.g,
                                   inside + c.mean(), atol=1e-9)

    def test_player_perturbation(self):
        p = random_panel(10, n=30)
        base = fit_regression_curve(p, SPLINE_FIXED)
        c = np.random.default_rng(0).normal(size=p.n_players)
        moved = PerformancePanel(p.grid, p.values + c[:, None], p.mask)
        fit = fit_regression_curve(moved, SPLINE_FIXED)
        np.testing.assert_allclose(fit.curve.g, base.curve.g + c.mean(), atol=1e-8)
        np.testing.assert_allclose(fit.effects.intercepts - base.effects.intercepts,
                                   c - c.mean(), atol=1e-8)
        c0 = c - c.mean()
        moved0 = PerformancePanel(p.grid, p.values + c0[:, None], p.mask)
        np.testing.assert_allclose(fit_regression_curve(moved0, SPLINE_FIXED).curve.g,
                                   base.curve.g, atol=1e-8)

    @pytest.mark.parametrize("name", ["spline:obs:none", "spline:obs:fixed"])
    def test_residual_orthogonality(self, name):
        p = random_panel(11)
        spec = EstimatorSpec.parse(name)
        fit = fit_regression_curve(p, spec)
        rows, cols, y = p.observed_cells()
        resid = y - fit.fitted[rows, cols]
        B = age_design(p, spec)[cols]
        assert np.max(np.abs(B.T @ resid)) < 1e-8 * np.abs(y).max() * y.size
        if fit.effects.kind == "fixed":
            per_player = np.bincount(rows, weights=resid, minlength=p.n_players)
            assert np.max(np.abs(per_player)) < 1e-8 * y.size

    def test_residual_sd_dof(self):
        p = random_panel(12)
        fit = fit_regression_curve(p, SPLINE_FIXED)
        rows, cols, y = p.observed_cells()
        resid = y - fit.fitted[rows, cols]
        dof = y.size - 5 - p.n_players
        assert fit.residual_sd == pytest.approx(np.sqrt(resid @ resid / dof))

    @pytest.mark.parametrize("effects", ["random-quad", "random-spline"])
    def test_random_effects_shrink(self, masked_sim, effects):
        masked = masked_sim[0]
        spec = EstimatorSpec("spline", "obs", effects, custom=True)
        fit = fit_regression_curve(masked, spec)
        fixed = fit_regression_curve(masked, SPLINE_FIXED)
        seen = masked.mask.any(axis=1)
        u = fit.effects.intercepts[seen]
        assert abs(u.mean()) < 1e-6
        if fit.effects.spline_coeffs is not None:
            assert np.max(np.abs(fit.effects.spline_coeffs[seen].mean(axis=0))) < 1e-6
        else:
            assert abs(fit.effects.linear[seen].mean()) < 1e-6
            assert abs(fit.effects.quadratic[seen].mean()) < 1e-6
        # per-player level deviation over the player's observed ages
        dev = np.where(masked.mask, fit.fitted - fit.curve.g[None, :], np.nan)
        level = np.nanmean(dev[seen], axis=1)
        assert np.var(level) < np.var(fixed.effects.intercepts[seen])
        assert np.all(fit.diagnostics["penalty"] > 0)

    def test_errors(self):
        p = PerformancePanel(AgeGrid(18, 20), [[1.0, 2.0, 3.0]])
        with pytest.raises(InsufficientDataError):
            fit_regression_curve(p, EstimatorSpec.parse("spline:obs:none"))
        with pytest.raises(SpecError):
            fit_regression_curve(random_panel(0), EstimatorSpec.parse("delta-plus"))


class TestDispatch:
    def test_delta_plus_identity(self):
        p = random_panel(13)
        np.testing.assert_array_equal(estimate(p, "delta-plus").curve.g,
                                      delta_plus_curve(p)[0].g)

    @pytest.mark.parametrize("spec", presets(), ids=lambda s: s.name)
    def test_shift_equivariance(self, masked_sim, spec):
        masked = masked_sim[0]
        a = estimate(masked, spec, rng=np.random.default_rng(1)).curve
        b = estimate(apply_affine(masked, 1, 3.0), spec, rng=np.random.default_rng(1)).curve
        np.testing.assert_allclose(b.g, a.g + 3.0, atol=1e-6)
        assert a.grid == masked.grid and np.all(np.isfinite(a.g))

    def test_masked_values_never_reach_estimators(self, masked_sim):
        masked, full, _, _ = masked_sim
        poisoned = full.values.copy()
        poisoned[~masked.mask] = 1e6
        p = PerformancePanel(masked.grid, poisoned, masked.mask)
        assert not np.any(p.values == 1e6)
        for spec in presets():
            a = estimate(masked, spec, rng=np.random.default_rng(2)).curve.g
            b = estimate(p, spec, rng=np.random.default_rng(2)).curve.g
            np.testing.assert_array_equal(a, b)

    def test_notrunc_close_to_obs(self, masked_sim):
        masked, _, truth, _ = masked_sim
        obs = estimate(masked, "spline:obs:fixed").curve.g
        notrunc = estimate(masked, "spline:notrunc:fixed", rng=np.random.default_rng(3)).curve.g
        g = truth.true_curve.g
        gap = np.mean(np.abs(obs - notrunc))
        assert gap < np.sqrt(np.mean((obs - g) ** 2))
        assert gap < np.sqrt(np.mean((notrunc - g) ** 2))

    def test_imputing_specs_report_trace(self, masked_sim):
        fit = estimate(masked_sim[0], "quant:trunc:fixed", rng=np.random.default_rng(4))
        assert fit.spec.name == "quant:trunc:fixed"
        assert fit.effects.kind == "fixed"
        assert fit.diagnostics.imputed.size == (~masked_sim[0].mask).sum()
