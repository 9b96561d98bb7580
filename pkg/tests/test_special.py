"""K0 / K1 against arbitrary-precision references."""

from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest

from eshaper import DomainError, bessel_k0, bessel_k1
from eshaper.special import bessel_kn_upward

mpmath.mp.dps = 40
X = np.geomspace(1e-6, 50.0, 400)


def _ref(order, x):
    return np.array([float(mpmath.besselk(order, mpmath.mpf(float(v)))) for v in x])


@pytest.mark.parametrize("order, fn", [(0, bessel_k0), (1, bessel_k1)])
def test_relative_error_over_range(order, fn):
    rel = np.abs(fn(X) / _ref(order, X) - 1)
    assert rel.max() <= 1e-10


def test_k0_at_one():
    assert bessel_k0(1.0) == pytest.approx(0.421024438, abs=1e-9)


def test_small_argument_limit():
    x = 1e-6
    assert bessel_k0(x) == pytest.approx(-math.log(x / 2) - np.euler_gamma, rel=1e-10)
    assert bessel_k1(x) * x == pytest.approx(1.0, rel=1e-10)


def test_derivative_identity():
    # K0' = -K1
    x, h = 1.7, 1e-5
    d = (bessel_k0(x + h) - bessel_k0(x - h)) / (2 * h)
    assert d == pytest.approx(-bessel_k1(x), rel=1e-8)


def test_wronskian():
    # I0 K1 + I1 K0 = 1/x
    x = np.array([0.01, 0.5, 3.0, 20.0])
    i0 = np.array([float(mpmath.besseli(0, v)) for v in x])
    i1 = np.array([float(mpmath.besseli(1, v)) for v in x])
    np.testing.assert_allclose(i0 * bessel_k1(x) + i1 * bessel_k0(x), 1 / x, rtol=1e-12)


def test_upward_recurrence_matches_reference():
    x = np.array([0.3, 2.0, 15.0])
    k = bessel_kn_upward(12, x)
    for m in (0, 1, 5, 12):
        np.testing.assert_allclose(k[m], _ref(m, x), rtol=1e-12)


@pytest.mark.parametrize("bad", [0.0, -1.0, float("nan")])
def test_domain_errors(bad):
    with pytest.raises(DomainError):
        bessel_k0(bad)
    with pytest.raises(DomainError):
        bessel_k1(np.array([1.0, bad]))


def test_scalar_and_array_shapes():
    assert isinstance(bessel_k0(2.0), float)
    assert bessel_k1(np.ones((2, 3))).shape == (2, 3)
