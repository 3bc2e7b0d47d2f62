"""Mean aging curves from panels with performance-driven missingness."""

from .config import RunConfig, load_config
from .estimate import AgingCurveEstimator, estimate
from .estimators import delta_curve, delta_plus_curve, fit_regression_curve, quantile_curve
from .evaluation import (EvaluationReport, bootstrap_curves, rmse_by_age,
                         shape_based_distance)
from .exceptions import (AgingCurveError, DataError, DegenerateCurveError,
                         DuplicateRecordError, GridError, InsufficientDataError,
                         InvalidParameterError, NumericalError, OutOfRangeError, ParseError,
                         ScheduleError, SingularDesignError, SpecError)
from .imputation import ImputationConfig, PanelImputer, impute_panel, smoothed_boundary
from .io import (PlayerSeasonRecord, build_panel, load_records, read_curves, read_panel,
                 write_curves, write_panel)
from .numerics import AgeGrid, least_squares_fit, truncated_normal_sample
from .panel import (PRESETS, AgeCurve, EstimatorSpec, FitResult, PerformancePanel,
                    PlayerEffects, observed_fraction_by_age, panel_from_array, presets)
from .simulation import (SimulationConfig, TruthBundle, default_pi_schedule, generate_mask,
                         run_factorial, simulate_masked_panel, simulate_panel,
                         true_mean_curve)
from .splines import NaturalSplineBasis, natural_spline_basis

__version__ = "0.1.0"

__all__ = [
    "AgeCurve",
    "AgeGrid",
    "AgingCurveError",
    "AgingCurveEstimator",
    "DataError",
    "DegenerateCurveError",
    "DuplicateRecordError",
    "EstimatorSpec",
    "EvaluationReport",
    "FitResult",
    "GridError",
    "ImputationConfig",
    "InsufficientDataError",
    "InvalidParameterError",
    "NaturalSplineBasis",
    "NumericalError",
    "OutOfRangeError",
    "PRESETS",
    "PanelImputer",
    "ParseError",
    "PerformancePanel",
    "PlayerEffects",
    "PlayerSeasonRecord",
    "RunConfig",
    "ScheduleError",
    "SimulationConfig",
    "SingularDesignError",
    "SpecError",
    "TruthBundle",
    "bootstrap_curves",
    "build_panel",
    "default_pi_schedule",
    "delta_curve",
    "delta_plus_curve",
    "estimate",
    "fit_regression_curve",
    "generate_mask",
    "impute_panel",
    "least_squares_fit",
    "load_config",
    "load_records",
    "natural_spline_basis",
    "observed_fraction_by_age",
    "panel_from_array",
    "presets",
    "quantile_curve",
    "read_curves",
    "read_panel",
    "rmse_by_age",
    "run_factorial",
    "shape_based_distance",
    "simulate_masked_panel",
    "simulate_panel",
    "smoothed_boundary",
    "true_mean_curve",
    "truncated_normal_sample",
    "write_curves",
    "write_panel",
]
