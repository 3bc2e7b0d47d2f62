"""Curve estimators that work directly on a panel."""

from .delta import DeltaDiagnostics, delta_curve, delta_plus_curve
from .quantile import QuantileDiagnostics, population_percentile, quantile_curve
from .regression import fit_regression_curve

__all__ = [
    "DeltaDiagnostics",
    "QuantileDiagnostics",
    "delta_curve",
    "delta_plus_curve",
    "fit_regression_curve",
    "population_percentile",
    "quantile_curve",
]
