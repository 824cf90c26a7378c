"""Hourly demand profiles and first-derivative peak detection."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model import DEFAULT_UNIT

HOURS_PER_DAY = 24


@dataclass(frozen=True, eq=False)
class DemandProfile:
    """One day of hourly flow observations, hour 0 first."""

    values: np.ndarray
    unit: str = DEFAULT_UNIT
    label: str = ""

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        if values.size != HOURS_PER_DAY:
            raise ValueError(f"expected {HOURS_PER_DAY} hours, found {values.size}")
        if not np.all(np.isfinite(values)):
            raise ValueError("profile values must be finite")
        if np.any(values < 0):
            bad = int(np.flatnonzero(values < 0)[0])
            raise ValueError(f"profile values must be >= 0 (hour {bad} is {values[bad]})")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __eq__(self, other):
        if not isinstance(other, DemandProfile):
            return NotImplemented
        return (
            self.unit == other.unit
            and self.label == other.label
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    @property
    def hours(self) -> np.ndarray:
        return np.arange(HOURS_PER_DAY, dtype=float)

    def reversed(self) -> "DemandProfile":
        return DemandProfile(self.values[::-1], self.unit, self.label)


class PeakKind(str, Enum):
    INTERIOR_MAX = "interior-max"
    LEFT_ENDPOINT = "left-endpoint"
    RIGHT_ENDPOINT = "right-endpoint"
    PLATEAU = "plateau"


# lower number wins when an hour qualifies under several rules
_PRIORITY = {
    PeakKind.INTERIOR_MAX: 0,
    PeakKind.LEFT_ENDPOINT: 1,
    PeakKind.RIGHT_ENDPOINT: 1,
    PeakKind.PLATEAU: 2,
}


@dataclass(frozen=True)
class PeakCandidate:
    hour_index: int
    value: float
    kind: PeakKind


def _plateau_runs(values: np.ndarray):
    """Yield ``(start, stop)`` for every maximal run of >= 2 equal values."""
    start = 0
    n = len(values)
    for i in range(1, n + 1):
        if i == n or values[i] != values[start]:
            if i - start >= 2:
                yield start, i
            start = i


def _prominence(values: np.ndarray, index: int) -> float:
    """Height above the higher of the two surrounding minima.

    Follows the usual topographic definition: walk outwards until a strictly
    higher value (or the edge) and take the lowest point on each side.
    """
    peak = values[index]
    left = index
    left_min = peak
    while left > 0 and values[left - 1] <= peak:
        left -= 1
        left_min = min(left_min, values[left])
    right = index
    right_min = peak
    while right < len(values) - 1 and values[right + 1] <= peak:
        right += 1
        right_min = min(right_min, values[right])
    return peak - max(left_min, right_min)


def detect_peaks(profile: DemandProfile, min_prominence: float | None = None) -> list[PeakCandidate]:
    """Flag candidate peak hours in a 24-point profile.

    Rules, applied to ``diff[i] = values[i+1] - values[i]``:

    * interior hour ``i`` with ``diff[i-1] > 0`` and ``diff[i] < 0``;
    * hour 0 if it exceeds hour 1, hour 23 if it exceeds hour 22;
    * each run of two or more equal values, once, at the run's centre
      (lower median for even lengths).

    Plateaus are flagged whether or not they are local maxima. Passing
    ``min_prominence`` drops candidates whose topographic prominence is
    below it; it is off by default.
    """
    if not isinstance(profile, DemandProfile):
        profile = DemandProfile(profile)
    values = profile.values
    n = len(values)
    diff = np.diff(values)
    found: dict[int, PeakKind] = {}

    def flag(index: int, kind: PeakKind):
        current = found.get(index)
        if current is None or _PRIORITY[kind] < _PRIORITY[current]:
            found[index] = kind

    for i in range(1, n - 1):
        if diff[i - 1] > 0 and diff[i] < 0:
            flag(i, PeakKind.INTERIOR_MAX)
    if values[0] > values[1]:
        flag(0, PeakKind.LEFT_ENDPOINT)
    if values[n - 1] > values[n - 2]:
        flag(n - 1, PeakKind.RIGHT_ENDPOINT)
    for start, stop in _plateau_runs(values):
        flag(start + (stop - start - 1) // 2, PeakKind.PLATEAU)

    candidates = [
        PeakCandidate(i, float(values[i]), found[i]) for i in sorted(found)
    ]
    if min_prominence is not None:
        if not math.isfinite(min_prominence) or min_prominence < 0:
            raise ValueError(f"min_prominence must be finite and >= 0, got {min_prominence}")
        candidates = [
            c for c in candidates if _prominence(values, c.hour_index) >= min_prominence
        ]
    return candidates
