"""Baseline plus skewed Gaussian peak decomposition of daily demand profiles."""

__version__ = "0.1.0"

from .estimator import SkewedGaussianDecomposition
from .fitting import FitConfig, FitError, FitReport, fit, fit_both, loss, loss_gradient, make_bounds
from .metrics import MetricsReport, compute_metrics
from .model import (
    DecompositionModel,
    PeakComponent,
    TimeGrid,
    eval_model,
    eval_peak,
    peak_gradient,
    sample_model,
)
from .optimize import NonFiniteError, SolverSettings, minimize_bounded
from .peaks import DemandProfile, PeakCandidate, PeakKind, detect_peaks
from .special import erf, erfc
from .synthgen import DayScenario, WeekScenario, generate_day, generate_week

__all__ = [
    "DayScenario",
    "DecompositionModel",
    "DemandProfile",
    "FitConfig",
    "FitError",
    "FitReport",
    "MetricsReport",
    "NonFiniteError",
    "PeakCandidate",
    "PeakComponent",
    "PeakKind",
    "SkewedGaussianDecomposition",
    "SolverSettings",
    "TimeGrid",
    "WeekScenario",
    "compute_metrics",
    "detect_peaks",
    "erf",
    "erfc",
    "eval_model",
    "eval_peak",
    "fit",
    "fit_both",
    "generate_day",
    "generate_week",
    "loss",
    "loss_gradient",
    "make_bounds",
    "minimize_bounded",
    "peak_gradient",
    "sample_model",
]
