"""Chi and standard normal quantiles by bisection on their CDFs."""
from __future__ import annotations

import math

from scipy.special import gammainc, gammaincc

from .errors import ValidationError

_ABS_TOL = 1e-12


def _bisect(f, lo: float, hi: float) -> float:
    # f increasing, f(lo) <= 0 <= f(hi)
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if hi - lo <= _ABS_TOL * max(1.0, abs(mid)):
            break
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def chi_cdf(k: int, z: float) -> float:
    return float(gammainc(k / 2.0, z * z / 2.0)) if z > 0 else 0.0


def chi_sf(k: int, z: float) -> float:
    return float(gammaincc(k / 2.0, z * z / 2.0)) if z > 0 else 1.0


def _upper_bracket(k: int, upper: float) -> float:
    hi = math.sqrt(k) + 1.0
    while chi_sf(k, hi) > upper:
        hi *= 2.0
    return hi


def chi_quantile(k: int, q: float) -> float:
    """z with P(chi_k <= z) = q."""
    if k < 1:
        raise ValidationError(f"degrees of freedom must be >= 1, got {k}")
    if not 0 < q < 1:
        raise ValidationError(f"probability must lie in (0, 1), got {q}")
    if q > 0.5:
        return chi_isf(k, 1.0 - q)
    hi = _upper_bracket(k, 1.0 - q)
    return _bisect(lambda z: chi_cdf(k, z) - q, 0.0, hi)


def chi_isf(k: int, upper: float) -> float:
    """z with P(chi_k > z) = upper; accurate for tiny tail probabilities."""
    if k < 1:
        raise ValidationError(f"degrees of freedom must be >= 1, got {k}")
    if not 0 < upper < 1:
        raise ValidationError(f"tail probability must lie in (0, 1), got {upper}")
    hi = _upper_bracket(k, upper)
    return _bisect(lambda z: upper - chi_sf(k, z), 0.0, hi)


def normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def normal_quantile(q: float) -> float:
    """Inverse of the standard normal CDF."""
    if not 0 < q < 1:
        raise ValidationError(f"probability must lie in (0, 1), got {q}")
    if q == 0.5:
        return 0.0
    if q > 0.5:
        return -normal_quantile(1.0 - q)
    lo = -1.0
    while normal_cdf(lo) > q:
        lo *= 2.0
    return _bisect(lambda z: normal_cdf(z) - q, lo, 0.0)
