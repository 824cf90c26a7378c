"""Reconstruction error metrics in original flow units."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class MetricsReport:
    """Fit quality of a reconstruction.

    ``r_squared`` is ``None`` when the observed series is constant, and the
    two percent fields are ``None`` when the observed mean is zero.
    """

    rmse: float
    mae: float
    max_abs_error: float
    r_squared: Optional[float]
    rmse_pct_of_mean: Optional[float]
    mae_pct_of_mean: Optional[float]

    def as_dict(self) -> dict:
        return asdict(self)


def compute_metrics(observed, predicted) -> MetricsReport:
    y = np.asarray(observed, dtype=float).reshape(-1)
    y_hat = np.asarray(predicted, dtype=float).reshape(-1)
    if y.shape != y_hat.shape:
        raise ValueError(
            f"length mismatch: {y.size} observed vs {y_hat.size} predicted values"
        )
    if y.size < 2:
        raise ValueError("at least two observations are required")

    err = y - y_hat
    abs_err = np.abs(err)
    rmse = float(np.sqrt(np.mean(err * err)))
    mae = float(np.mean(abs_err))
    max_abs = float(np.max(abs_err))

    mean = float(np.mean(y))
    ss_tot = float(np.sum((y - mean) ** 2))
    r_squared = None if ss_tot == 0 else 1.0 - float(np.sum(err * err)) / ss_tot

    if mean == 0:
        rmse_pct = mae_pct = None
    else:
        rmse_pct = 100.0 * rmse / mean
        mae_pct = 100.0 * mae / mean
    return MetricsReport(rmse, mae, max_abs, r_squared, rmse_pct, mae_pct)
