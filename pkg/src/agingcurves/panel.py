"""Performance panels, age curves, estimator specs and fit results."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .exceptions import GridError, InvalidParameterError, SpecError
from .numerics import AgeGrid

METHODS = ("delta-plus", "spline", "quad", "quant")
DATA_MODES = ("obs", "trunc", "notrunc")
EFFECTS = ("none", "fixed", "random-quad", "random-spline")

PRESETS = (
    "delta-plus",
    "spline:obs:none",
    "spline:obs:fixed",
    "spline:trunc:fixed",
    "spline:notrunc:fixed",
    "quant:trunc:fixed",
    "quant:obs:none",
    "quad:trunc:fixed",
    "spline:trunc:random-quad",
    "spline:trunc:random-spline",
)


def _readonly(arr):
    arr.flags.writeable = False
    return arr


class PerformancePanel:
    """Player-by-age performance matrix with an observability mask.

    Masked cells hold ``NaN`` regardless of what was passed in, so values
    that were never observed cannot leak into estimators. Use
    :meth:`observed_cells` or :meth:`observed_column` to read data.

    Parameters
    ----------
    grid : AgeGrid
    values : array-like, shape (N, K)
    mask : array-like of bool, shape (N, K), optional
        Defaults to ``isfinite(values)``.
    player_ids : sequence, optional
        Defaults to ``0..N-1``.
    """

    def __init__(self, grid: AgeGrid, values, mask=None, player_ids=None):
        values = np.array(values, dtype=float)
        if values.ndim != 2:
            raise InvalidParameterError("panel values must be a 2-d array")
        if mask is None:
            mask = np.isfinite(values)
        mask = np.array(mask, dtype=bool)
        if mask.shape != values.shape:
            raise InvalidParameterError(
                f"mask shape {mask.shape} differs from values shape {values.shape}"
            )
        if values.shape[1] != grid.K:
            raise GridError(f"panel has {values.shape[1]} ages but grid has {grid.K}")
        if values.shape[0] < 1:
            raise InvalidParameterError("panel needs at least one player")
        if not np.all(np.isfinite(values[mask])):
            raise InvalidParameterError("observed cells must be finite")
        values[~mask] = np.nan
        if player_ids is None:
            player_ids = range(values.shape[0])
        player_ids = tuple(player_ids)
        if len(player_ids) != values.shape[0]:
            raise InvalidParameterError("one player id per row is required")
        self.grid = grid
        self._values = _readonly(values)
        self.mask = _readonly(mask)
        self.player_ids = player_ids

    @property
    def n_players(self) -> int:
        return self._values.shape[0]

    @property
    def shape(self):
        return self._values.shape

    @property
    def values(self) -> np.ndarray:
        """Read-only view; masked cells are ``NaN``."""
        return self._values

    def observed_count(self) -> np.ndarray:
        return self.mask.sum(axis=0)

    def observed_cells(self):
        """Return ``(player_index, age_index, value)`` arrays for observed cells,
        in row-major order."""
        rows, cols = np.nonzero(self.mask)
        return rows, cols, self._values[rows, cols]

    def observed_column(self, k: int) -> np.ndarray:
        return self._values[self.mask[:, k], k]

    def with_mask(self, mask) -> "PerformancePanel":
        """Panel on the same values with a (stricter) mask applied."""
        mask = np.asarray(mask, dtype=bool)
        if np.any(mask & ~self.mask):
            raise InvalidParameterError("cannot unmask cells that hold no value")
        return PerformancePanel(self.grid, self._values, mask, self.player_ids)

    def subset_rows(self, rows) -> "PerformancePanel":
        rows = np.asarray(rows, dtype=int)
        ids = [self.player_ids[r] for r in rows]
        return PerformancePanel(self.grid, self._values[rows], self.mask[rows], ids)

    def __eq__(self, other):
        if not isinstance(other, PerformancePanel):
            return NotImplemented
        return (
            self.grid == other.grid
            and np.array_equal(self.mask, other.mask)
            and np.array_equal(self._values, other._values, equal_nan=True)
            and self.player_ids == other.player_ids
        )

    def __repr__(self):
        n, k = self.shape
        return (f"PerformancePanel(N={n}, ages={self.grid.t_min}..{self.grid.t_max}, "
                f"observed={int(self.mask.sum())}/{n * k})")


@dataclass(frozen=True)
class AgeCurve:
    grid: AgeGrid
    g: np.ndarray
    support_counts: Optional[np.ndarray] = None

    def __post_init__(self):
        g = np.array(self.g, dtype=float)
        if g.shape != (self.grid.K,):
            raise GridError(f"curve needs {self.grid.K} values, got shape {g.shape}")
        if not np.all(np.isfinite(g)):
            raise InvalidParameterError("curve values must be finite")
        object.__setattr__(self, "g", _readonly(g))
        if self.support_counts is not None:
            sc = np.array(self.support_counts, dtype=int)
            if sc.shape != g.shape:
                raise GridError("support_counts must align with the grid")
            object.__setattr__(self, "support_counts", _readonly(sc))

    @property
    def ages(self) -> np.ndarray:
        return self.grid.ages

    def at(self, age: int) -> float:
        return float(self.g[self.grid.index(age)])

    def shifted(self, c: float) -> "AgeCurve":
        return AgeCurve(self.grid, self.g + c, self.support_counts)


@dataclass(frozen=True)
class EstimatorSpec:
    """A ``method:data:effects`` triple.

    Combinations outside :data:`PRESETS` are rejected unless ``custom`` is set.
    """

    method: str
    data: str = "obs"
    effects: str = "none"
    spline_df: int = 6
    boundary_quantile: float = 0.75
    custom: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise SpecError(f"unknown method {self.method!r}")
        if self.data not in DATA_MODES:
            raise SpecError(f"unknown data mode {self.data!r}")
        if self.effects not in EFFECTS:
            raise SpecError(f"unknown effects kind {self.effects!r}")
        if self.method == "delta-plus" and (self.data, self.effects) != ("obs", "none"):
            raise SpecError("delta-plus takes neither imputation nor player effects")
        if int(self.spline_df) != self.spline_df or self.spline_df < 2:
            raise SpecError(f"spline_df must be an integer >= 2, got {self.spline_df}")
        if not 0.0 < self.boundary_quantile < 1.0:
            raise SpecError("boundary_quantile must lie strictly between 0 and 1")
        if not self.custom and self.name not in PRESETS:
            raise SpecError(
                f"{self.name!r} is not a preset; pass custom=True to use it anyway"
            )

    @property
    def name(self) -> str:
        if self.method == "delta-plus":
            return "delta-plus"
        return f"{self.method}:{self.data}:{self.effects}"

    @classmethod
    def parse(cls, text: str, **kwargs) -> "EstimatorSpec":
        text = text.strip()
        if text == "delta-plus":
            return cls("delta-plus", **kwargs)
        parts = text.split(":")
        if len(parts) != 3:
            raise SpecError(f"expected 'method:data:effects' or 'delta-plus', got {text!r}")
        return cls(*parts, **kwargs)

    def __str__(self):
        return self.name


def presets(**kwargs) -> list:
    """All ten preset specs, sharing any keyword overrides."""
    return [EstimatorSpec.parse(name, **kwargs) for name in PRESETS]


@dataclass(frozen=True)
class PlayerEffects:
    """Fitted player terms. Coefficients for players without observations are 0.

    For ``random-quad`` the linear/quadratic terms are on the centred, scaled
    age ``(t - centre) / scale`` stored in ``age_centre`` / ``age_scale``.
    For ``random-spline`` ``spline_coeffs`` column 0 duplicates ``intercepts``.
    """

    kind: str
    intercepts: np.ndarray
    linear: Optional[np.ndarray] = None
    quadratic: Optional[np.ndarray] = None
    spline_coeffs: Optional[np.ndarray] = None
    age_centre: float = 0.0
    age_scale: float = 1.0

    @classmethod
    def none(cls, n_players: int) -> "PlayerEffects":
        return cls("none", np.zeros(n_players))


@dataclass
class FitResult:
    curve: AgeCurve
    effects: PlayerEffects
    residual_sd: float
    spec: EstimatorSpec
    fitted: Optional[np.ndarray] = field(default=None, repr=False)
    age_coef: Optional[np.ndarray] = None
    diagnostics: object = field(default=None, repr=False)

    def __post_init__(self):
        if not self.residual_sd >= 0:
            raise InvalidParameterError("residual_sd must be nonnegative")


def observed_fraction_by_age(panel: PerformancePanel) -> np.ndarray:
    """Share of the panel's players observed at each age."""
    return panel.observed_count() / panel.n_players


def apply_affine(panel: PerformancePanel, scale: float, shift: float) -> PerformancePanel:
    """Map observed values to ``scale * Y + shift``; the mask is unchanged."""
    if scale == 0:
        raise InvalidParameterError("scale must be nonzero")
    return PerformancePanel(panel.grid, scale * panel.values + shift, panel.mask,
                            panel.player_ids)


def panel_from_array(values, t_min: int = 18, player_ids: Sequence = None) -> PerformancePanel:
    """Build a panel from an ``N x K`` array where ``NaN`` marks unobserved cells."""
    values = np.asarray(values, dtype=float)
    grid = AgeGrid(t_min, t_min + values.shape[1] - 1)
    return PerformancePanel(grid, values, np.isfinite(values), player_ids)
