import numpy as np
import pytest

from agingcurves import (AgeCurve, AgeGrid, EstimatorSpec, PerformancePanel, panel_from_array,
                         presets)
from agingcurves.exceptions import GridError, InvalidParameterError, SpecError
from agingcurves.panel import PRESETS, apply_affine, observed_fraction_by_age


def small_panel():
    grid = AgeGrid(20, 23)
    values = np.arange(12, dtype=float).reshape(3, 4)
    mask = np.array([[1, 1, 0, 1], [0, 1, 1, 1], [1, 0, 0, 0]], bool)
    return PerformancePanel(grid, values, mask, ["a", "b", "c"])


def test_masked_cells_hold_nan():
    p = small_panel()
    assert np.isnan(p.values[0, 2]) and p.values[0, 1] == 1.0
    assert not p.values.flags.writeable and not p.mask.flags.writeable


def test_observed_accessors():
    p = small_panel()
    rows, cols, vals = p.observed_cells()
    assert rows.size == p.mask.sum()
    np.testing.assert_array_equal(vals, np.arange(12.0).reshape(3, 4)[p.mask])
    np.testing.assert_array_equal(p.observed_column(1), [1.0, 5.0])
    np.testing.assert_array_equal(p.observed_count(), [2, 2, 1, 2])


def test_observed_fraction():
    p = small_panel()
    frac = observed_fraction_by_age(p)
    np.testing.assert_allclose(frac, [2 / 3, 2 / 3, 1 / 3, 2 / 3])
    assert frac.sum() * p.n_players == pytest.approx(p.mask.sum())
    full = PerformancePanel(p.grid, np.zeros((3, 4)))
    assert np.all(observed_fraction_by_age(full) == 1.0)
    empty_age = PerformancePanel(p.grid, np.zeros((3, 4)), np.tile([1, 0, 1, 1], (3, 1)))
    assert observed_fraction_by_age(empty_age)[1] == 0.0


def test_simulated_fraction_peaks_early_twenties(masked_sim):
    masked = masked_sim[0]
    peak = masked.grid.ages[np.argmax(observed_fraction_by_age(masked))]
    assert 23 <= peak <= 24


def test_constructor_checks():
    g = AgeGrid(20, 23)
    with pytest.raises(GridError):
        PerformancePanel(g, np.zeros((2, 3)))
    with pytest.raises(InvalidParameterError):
        PerformancePanel(g, np.zeros((2, 4)), np.ones((2, 3), bool))
    with pytest.raises(InvalidParameterError):
        PerformancePanel(g, np.full((2, 4), np.nan), np.ones((2, 4), bool))
    with pytest.raises(InvalidParameterError):
        small_panel().with_mask(np.ones((3, 4), bool))


def test_affine():
    p = small_panel()
    assert apply_affine(p, 1, 0) == p
    shifted = apply_affine(p, 1, 2.5)
    np.testing.assert_array_equal(shifted.observed_cells()[2], p.observed_cells()[2] + 2.5)
    back = apply_affine(apply_affine(p, 2, -1), 0.5, 0.5)
    np.testing.assert_allclose(back.observed_cells()[2], p.observed_cells()[2], atol=1e-12)
    np.testing.assert_array_equal(back.mask, p.mask)
    with pytest.raises(InvalidParameterError):
        apply_affine(p, 0, 1)


def test_panel_from_array_and_subset():
    arr = np.array([[1.0, np.nan, 2.0], [np.nan, 3.0, 4.0]])
    p = panel_from_array(arr, t_min=30)
    assert p.grid == AgeGrid(30, 32)
    assert p.mask.tolist() == [[True, False, True], [False, True, True]]
    sub = p.subset_rows([1, 1, 0])
    assert sub.shape == (3, 3) and sub.player_ids == (1, 1, 0)


def test_age_curve():
    c = AgeCurve(AgeGrid(20, 22), [1.0, 2.0, 3.0])
    assert c.at(21) == 2.0
    np.testing.assert_array_equal(c.shifted(1).g, [2, 3, 4])
    with pytest.raises(Exception):
        AgeCurve(AgeGrid(20, 22), [1.0, np.nan, 3.0])
    with pytest.raises(Exception):
        AgeCurve(AgeGrid(20, 22), [1.0, 2.0])


class TestSpec:
    def test_ten_presets(self):
        assert len(PRESETS) == 10
        assert [s.name for s in presets()] == list(PRESETS)

    def test_parse_round_trip(self):
        for name in PRESETS:
            assert EstimatorSpec.parse(name).name == name

    def test_non_preset_needs_flag(self):
        with pytest.raises(SpecError):
            EstimatorSpec.parse("quad:obs:none")
        assert EstimatorSpec.parse("quad:obs:none", custom=True).name == "quad:obs:none"

    @pytest.mark.parametrize("text", ["spline:obs", "foo:obs:none", "spline:bad:none",
                                      "spline:obs:mixed"])
    def test_bad_text(self, text):
        with pytest.raises(SpecError):
            EstimatorSpec.parse(text, custom=True)

    def test_field_checks(self):
        with pytest.raises(SpecError):
            EstimatorSpec("spline", "obs", "none", spline_df=1)
        with pytest.raises(SpecError):
            EstimatorSpec("spline", "trunc", "fixed", boundary_quantile=1.0)
