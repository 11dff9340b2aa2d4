import math

import mpmath
import numpy as np
import pytest

from jointggm.errors import ValidationError
from jointggm.quantiles import chi_isf, chi_quantile, normal_cdf, normal_quantile

mpmath.mp.dps = 40

K_GRID = [1, 2, 5, 10, 50]
Q_GRID = [0.5, 0.9, 0.95, 0.99, 1 - 1e-6]


def _mp_bisect(f, lo, hi, iters=200):
    lo, hi = mpmath.mpf(lo), mpmath.mpf(hi)
    for _ in range(iters):
        mid = (lo + hi) / 2
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def chisq_quantile_oracle(k, q):
    # inversion of the regularized lower incomplete gamma in high precision
    return _mp_bisect(lambda x: mpmath.gammainc(mpmath.mpf(k) / 2, 0, x / 2, regularized=True) - q, 0, 1000)


def normal_quantile_oracle(q):
    return _mp_bisect(lambda z: mpmath.ncdf(z) - q, -40, 40)


@pytest.mark.parametrize("k", K_GRID)
@pytest.mark.parametrize("q", Q_GRID)
def test_chi_quantile_squared_matches_oracle(k, q):
    assert chi_quantile(k, q) ** 2 == pytest.approx(float(chisq_quantile_oracle(k, q)), abs=1e-7)


def test_chi_quantile_examples():
    assert chi_quantile(1, 0.95) == pytest.approx(1.959964, abs=1e-6)
    assert chi_quantile(2, 0.95) == pytest.approx(2.447747, abs=1e-6)
    assert chi_quantile(1, 0.95) == pytest.approx(math.sqrt(3.841459), abs=1e-6)
    assert chi_quantile(3, 1e-12) < 1e-3


def test_chi_isf_tiny_tail():
    # p**(-3) level with p = 200
    z = chi_isf(5, 200.0 ** -3)
    assert float(mpmath.gammainc(2.5, float(z) ** 2 / 2, mpmath.inf, regularized=True)) == pytest.approx(
        200.0 ** -3, rel=1e-8
    )


@pytest.mark.parametrize("q", [0.001, 0.01, 0.05, 0.2, 0.5, 0.7, 0.975, 0.999999])
def test_normal_quantile_matches_oracle(q):
    assert normal_quantile(q) == pytest.approx(float(normal_quantile_oracle(q)), abs=1e-9)


def test_normal_quantile_examples():
    assert normal_quantile(0.5) == 0.0
    assert normal_quantile(0.05) == pytest.approx(-1.644854, abs=1e-6)


def test_normal_round_trip():
    for q in np.arange(0.01, 1.0, 0.01):
        assert normal_cdf(normal_quantile(q)) == pytest.approx(q, abs=1e-9)


@pytest.mark.parametrize("bad", [0.0, 1.0, -0.1, 1.5])
def test_out_of_range(bad):
    with pytest.raises(ValidationError):
        chi_quantile(2, bad)
    with pytest.raises(ValidationError):
        normal_quantile(bad)
    with pytest.raises(ValidationError):
        chi_quantile(0, 0.5)
