"""Skewed Gaussian peak shape and the baseline-plus-peaks demand model."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .special import erfc

_SQRT2 = math.sqrt(2.0)
_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)

N_PEAK_PARAMS = 4
DEFAULT_UNIT = "m3/h"


@dataclass(frozen=True)
class PeakComponent:
    """One skewed Gaussian peak.

    ``amplitude`` is the apex value at ``location`` (for every skewness),
    ``width`` the spread in hours and ``skewness`` the dimensionless shape
    parameter; positive values give a sharp rise and slow decline.
    """

    amplitude: float
    location: float
    width: float
    skewness: float = 0.0

    def __post_init__(self):
        for name in ("amplitude", "location", "width", "skewness"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"peak {name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        if self.amplitude < 0:
            raise ValueError(f"peak amplitude must be >= 0, got {self.amplitude}")
        if self.width <= 0:
            raise ValueError(f"peak width must be > 0, got {self.width}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.amplitude, self.location, self.width, self.skewness)


def _canonical_key(peak: PeakComponent):
    return (peak.location, peak.amplitude, peak.width, peak.skewness)


@dataclass(frozen=True)
class DecompositionModel:
    """Constant baseline plus a list of skewed Gaussian peaks.

    Peaks are stored sorted by location (ties by amplitude) so that two
    models holding the same components compare and serialize identically.
    """

    baseline: float
    peaks: tuple[PeakComponent, ...] = ()
    unit: str = DEFAULT_UNIT

    def __post_init__(self):
        baseline = float(self.baseline)
        if not math.isfinite(baseline) or baseline < 0:
            raise ValueError(f"baseline must be finite and >= 0, got {baseline!r}")
        object.__setattr__(self, "baseline", baseline)
        peaks = tuple(self.peaks)
        for p in peaks:
            if not isinstance(p, PeakComponent):
                raise TypeError(f"expected PeakComponent, got {type(p).__name__}")
        object.__setattr__(self, "peaks", tuple(sorted(peaks, key=_canonical_key)))

    @property
    def n_peaks(self) -> int:
        return len(self.peaks)

    @property
    def n_params(self) -> int:
        return N_PEAK_PARAMS * self.n_peaks + 1

    def to_vector(self) -> np.ndarray:
        """Flatten to ``[baseline, A1, mu1, sigma1, alpha1, A2, ...]``."""
        vec = [self.baseline]
        for p in self.peaks:
            vec.extend(p.as_tuple())
        return np.asarray(vec, dtype=float)

    @classmethod
    def from_vector(cls, params, unit: str = DEFAULT_UNIT) -> "DecompositionModel":
        params = np.asarray(params, dtype=float)
        if params.ndim != 1 or params.size % N_PEAK_PARAMS != 1:
            raise ValueError(
                f"parameter vector length must be 4*n_peaks + 1, got {params.size}"
            )
        peaks = [
            PeakComponent(*params[1 + N_PEAK_PARAMS * j : 1 + N_PEAK_PARAMS * (j + 1)])
            for j in range(params.size // N_PEAK_PARAMS)
        ]
        return cls(max(float(params[0]), 0.0), tuple(peaks), unit)


@dataclass(frozen=True)
class TimeGrid:
    """Evenly spaced evaluation hours ``start, start + step, ...``."""

    start: float = 0.0
    step: float = 1.0
    count: int = 24

    def __post_init__(self):
        if not (math.isfinite(self.start) and math.isfinite(self.step)):
            raise ValueError("grid start and step must be finite")
        if self.step <= 0:
            raise ValueError(f"grid step must be > 0, got {self.step}")
        if int(self.count) != self.count or self.count < 1:
            raise ValueError(f"grid count must be a positive integer, got {self.count}")
        object.__setattr__(self, "count", int(self.count))

    @classmethod
    def spanning_day(cls, step: float = 1.0, end: float = 23.0) -> "TimeGrid":
        """Grid from hour 0 to ``end`` inclusive; ``end`` must be a multiple of ``step``."""
        if step <= 0:
            raise ValueError(f"grid step must be > 0, got {step}")
        count = int(round(end / step)) + 1
        if not math.isclose((count - 1) * step, end, rel_tol=0, abs_tol=1e-9):
            raise ValueError(f"step {step} does not divide the {end} hour span evenly")
        return cls(0.0, float(step), count)

    def points(self) -> np.ndarray:
        # index * step avoids the drift of a cumulative sum
        return self.start + self.step * np.arange(self.count, dtype=float)


def _shape_terms(t, location, width, skewness):
    z = (t - location) / width
    gauss = np.exp(-0.5 * z * z)
    u = skewness * z / _SQRT2
    return z, gauss, u


def eval_peak(peak: PeakComponent, t):
    """Value of one skewed Gaussian at hour(s) ``t``."""
    t = np.asarray(t, dtype=float)
    z, gauss, u = _shape_terms(t, peak.location, peak.width, peak.skewness)
    value = peak.amplitude * gauss * erfc(-u)
    return float(value) if value.ndim == 0 else value


def eval_model(model: DecompositionModel, t):
    """Baseline plus the sum of all peaks at hour(s) ``t``."""
    t = np.asarray(t, dtype=float)
    total = np.full(t.shape, model.baseline)
    for peak in model.peaks:
        total = total + eval_peak(peak, t)
    return float(total) if total.ndim == 0 else total


def sample_model(model: DecompositionModel, grid: TimeGrid = TimeGrid()) -> np.ndarray:
    return np.asarray(eval_model(model, grid.points()), dtype=float).reshape(grid.count)


def peak_gradient(peak: PeakComponent, t) -> np.ndarray:
    """Partial derivatives of :func:`eval_peak` w.r.t. (A, mu, sigma, alpha).

    Returns shape ``(4,)`` for scalar ``t`` or ``(4, len(t))`` otherwise.
    """
    t = np.asarray(t, dtype=float)
    grads = peak_terms_and_gradients(
        np.array([peak.amplitude]),
        np.array([peak.location]),
        np.array([peak.width]),
        np.array([peak.skewness]),
        np.atleast_1d(t),
    )[1][:, 0, :]
    return grads[:, 0] if t.ndim == 0 else grads


def peak_terms_and_gradients(amplitude, location, width, skewness, t):
    """Vectorised peak values and parameter partials.

    Peak parameters are 1-D arrays of length ``n``; ``t`` is 1-D of length
    ``m``. Returns ``values`` of shape ``(n, m)`` and ``grads`` of shape
    ``(4, n, m)`` ordered (A, mu, sigma, alpha).
    """
    amp = np.asarray(amplitude, dtype=float)[:, None]
    loc = np.asarray(location, dtype=float)[:, None]
    wid = np.asarray(width, dtype=float)[:, None]
    skw = np.asarray(skewness, dtype=float)[:, None]
    t = np.asarray(t, dtype=float)[None, :]

    z, gauss, u = _shape_terms(t, loc, wid, skw)
    skew_factor = erfc(-u)
    d_skew_du = _TWO_OVER_SQRT_PI * np.exp(-u * u)

    shape = gauss * skew_factor
    values = amp * shape
    # df/dz for fixed A, alpha
    df_dz = amp * gauss * (-z * skew_factor + d_skew_du * skw / _SQRT2)

    grads = np.empty((4,) + values.shape)
    grads[0] = shape
    grads[1] = -df_dz / wid
    grads[2] = -df_dz * z / wid
    grads[3] = amp * gauss * d_skew_du * z / _SQRT2
    return values, grads
