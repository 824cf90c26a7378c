"""Gauss error function and its complement.

Both come from the C math library (``math.erf``/``math.erfc``), which is
accurate to about one ulp and which numba compiles to a direct call, so the
fitting kernels can use the scalar versions inside ``njit`` code.

The peak shape needs ``1 + erf(u)``; for very negative ``u`` that sum
cancels, so the model evaluates it as ``erfc(-u)`` instead.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def erf_scalar(x: float) -> float:
    return math.erf(x)


@njit(cache=True)
def erfc_scalar(x: float) -> float:
    return math.erfc(x)


def _apply(fn, x):
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        return float(fn(float(arr)))
    return np.vectorize(fn, otypes=[float])(arr)


def erf(x):
    """Gauss error function for a scalar or array argument.

    Scalars in give a Python float back; arrays keep their shape. The
    result is exactly ``+/-1`` once ``|x|`` passes about 5.9.
    """
    return _apply(math.erf, x)


def erfc(x):
    """Complementary error function ``1 - erf(x)`` without tail cancellation.

    Relative accuracy holds until the result underflows near ``x = 27``.
    """
    return _apply(math.erfc, x)
