"""scikit-learn compatible front end for the decomposition."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, column_or_1d

from .fitting import FitConfig, fit
from .model import DEFAULT_UNIT, eval_model, eval_peak
from .optimize import SolverSettings
from .peaks import HOURS_PER_DAY, DemandProfile


def _hours_column(X) -> np.ndarray:
    X = check_array(X, ensure_2d=False, dtype=float)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(f"X must hold a single hour column, got {X.shape[1]} columns")
        X = X[:, 0]
    return X


class SkewedGaussianDecomposition(RegressorMixin, TransformerMixin, BaseEstimator):
    """Decompose a 24-hour demand profile into a baseline and skewed peaks.

    ``X`` is the hour of each observation (one column, hours 0..23, any
    order) and ``y`` the observed flow. After fitting, ``predict`` evaluates
    the reconstructed demand at arbitrary hours and ``transform`` returns the
    baseline and each peak component as columns.

    Parameters mirror :class:`~sgdecomp.fitting.FitConfig`.

    Attributes
    ----------
    model_ : DecompositionModel
    report_ : FitReport
    n_peaks_ : int
    baseline_ : float
    peaks_ : ndarray of shape (n_peaks_, 4)
        Rows of (amplitude, location, width, skewness).
    """

    def __init__(
        self,
        r1_width_target=2.0,
        r2_skew_weight=0.01,
        r1_weight=1.0,
        sigma_starts=(1.0, 2.0, 3.0),
        alpha_starts=(-1.0, 0.0, 1.0),
        sigma_bounds=(0.1, 10.0),
        alpha_bounds=(-5.0, 5.0),
        amplitude_cap_factor=1.2,
        baseline_cap_percentile=10.0,
        symmetric=False,
        per_peak_combinatorial=False,
        min_prominence=None,
        max_iterations=500,
        gradient_tolerance=1e-8,
        history_size=10,
        function_tolerance=SolverSettings.function_tolerance,
        stall_gradient_tolerance=SolverSettings.stall_gradient_tolerance,
        unit=DEFAULT_UNIT,
    ):
        self.r1_width_target = r1_width_target
        self.r2_skew_weight = r2_skew_weight
        self.r1_weight = r1_weight
        self.sigma_starts = sigma_starts
        self.alpha_starts = alpha_starts
        self.sigma_bounds = sigma_bounds
        self.alpha_bounds = alpha_bounds
        self.amplitude_cap_factor = amplitude_cap_factor
        self.baseline_cap_percentile = baseline_cap_percentile
        self.symmetric = symmetric
        self.per_peak_combinatorial = per_peak_combinatorial
        self.min_prominence = min_prominence
        self.max_iterations = max_iterations
        self.gradient_tolerance = gradient_tolerance
        self.history_size = history_size
        self.function_tolerance = function_tolerance
        self.stall_gradient_tolerance = stall_gradient_tolerance
        self.unit = unit

    def _config(self) -> FitConfig:
        return FitConfig(
            r1_width_target=self.r1_width_target,
            r2_skew_weight=self.r2_skew_weight,
            r1_weight=self.r1_weight,
            sigma_starts=self.sigma_starts,
            alpha_starts=self.alpha_starts,
            sigma_bounds=self.sigma_bounds,
            alpha_bounds=self.alpha_bounds,
            amplitude_cap_factor=self.amplitude_cap_factor,
            baseline_cap_percentile=self.baseline_cap_percentile,
            symmetric=self.symmetric,
            per_peak_combinatorial=self.per_peak_combinatorial,
            min_prominence=self.min_prominence,
            solver=SolverSettings(
                self.max_iterations, self.gradient_tolerance, self.history_size,
                self.function_tolerance, self.stall_gradient_tolerance,
            ),
        )

    def fit(self, X, y=None):
        """Fit to one day. ``y=None`` treats ``X`` as the 24 flows in hour order."""
        if y is None:
            y = column_or_1d(check_array(X, ensure_2d=False, dtype=float))
            hours = np.arange(y.size, dtype=float)
        else:
            hours = _hours_column(X)
            y = column_or_1d(check_array(y, ensure_2d=False, dtype=float))
            if hours.size != y.size:
                raise ValueError(f"X has {hours.size} rows but y has {y.size}")
        if y.size != HOURS_PER_DAY:
            raise ValueError(f"expected {HOURS_PER_DAY} hourly observations, got {y.size}")
        order = np.argsort(hours, kind="stable")
        if not np.array_equal(hours[order], np.arange(HOURS_PER_DAY)):
            raise ValueError("X must contain each hour 0..23 exactly once")

        self.report_ = fit(DemandProfile(y[order], self.unit), self._config())
        self.model_ = self.report_.model
        self.n_peaks_ = self.model_.n_peaks
        self.baseline_ = self.model_.baseline
        self.peaks_ = np.array([p.as_tuple() for p in self.model_.peaks]).reshape(-1, 4)
        self.n_features_in_ = 1
        return self

    def predict(self, X=None):
        """Reconstructed demand at the hours in ``X`` (default 0..23)."""
        check_is_fitted(self, "model_")
        hours = np.arange(HOURS_PER_DAY, dtype=float) if X is None else _hours_column(X)
        return np.asarray(eval_model(self.model_, hours), dtype=float).reshape(hours.shape)

    def transform(self, X=None):
        """Columns ``[baseline, peak_1, ..., peak_n]`` evaluated at ``X``."""
        check_is_fitted(self, "model_")
        hours = np.arange(HOURS_PER_DAY, dtype=float) if X is None else _hours_column(X)
        cols = [np.full(hours.shape, self.model_.baseline)]
        cols += [np.asarray(eval_peak(p, hours), dtype=float).reshape(hours.shape) for p in self.model_.peaks]
        return np.column_stack(cols)

    def fit_transform(self, X, y=None, **fit_params):
        self.fit(X, y)
        return self.transform(None if y is None else X)
