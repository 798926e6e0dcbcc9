"""The K0/K1 kernels against an extended-precision series oracle."""

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hyperchannel import _bessel

mp.mp.dps = 40


def _oracle(order: int, x: float) -> float:
    return float(mp.besselk(order, mp.mpf(x)))


@pytest.mark.parametrize("fn,order", [(_bessel.k0, 0), (_bessel.k1, 1)])
def test_matches_high_precision_series(fn, order):
    xs = np.concatenate([
        np.geomspace(1e-8, 1.999, 60),
        np.linspace(1.999, 2.001, 7),
        np.geomspace(2.001, 650.0, 60),
    ])
    for x in xs:
        exact = _oracle(order, float(x))
        assert fn(float(x)) == pytest.approx(exact, rel=1e-12)


@given(st.floats(min_value=1e-6, max_value=500.0,
                 allow_nan=False, allow_infinity=False))
@settings(max_examples=60, deadline=None)
def test_k0_relative_accuracy_everywhere(x):
    exact = _oracle(0, x)
    assert _bessel.k0(x) == pytest.approx(exact, rel=1e-10)


@given(st.floats(min_value=1e-6, max_value=500.0,
                 allow_nan=False, allow_infinity=False))
@settings(max_examples=60, deadline=None)
def test_k1_relative_accuracy_everywhere(x):
    exact = _oracle(1, x)
    assert _bessel.k1(x) == pytest.approx(exact, rel=1e-10)


def test_recurrence_consistency():
    # K0'(x) = -K1(x) via central differences
    for x in (0.3, 1.0, 3.0, 10.0):
        h = 1e-6 * x
        fd = (_bessel.k0(x + h) - _bessel.k0(x - h)) / (2 * h)
        assert fd == pytest.approx(-_bessel.k1(x), rel=1e-7)


def test_vectorized_matches_scalar():
    xs = np.array([0.01, 0.5, 1.9, 2.0, 2.1, 30.0])
    np.testing.assert_allclose(_bessel.k0(xs),
                               [_bessel.k0(float(x)) for x in xs], rtol=0)
    np.testing.assert_allclose(_bessel.k1(xs),
                               [_bessel.k1(float(x)) for x in xs], rtol=0)


def test_rejects_nonpositive():
    with pytest.raises(ValueError):
        _bessel.k0(0.0)
    with pytest.raises(ValueError):
        _bessel.k1(-1.0)
    with pytest.raises(ValueError):
        _bessel.k0(np.array([1.0, -2.0]))
