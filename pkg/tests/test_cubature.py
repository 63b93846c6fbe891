"""Adaptive rectangle cubature: exactness, localization, and failure modes."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from esn2 import CubatureControls, NonFiniteIntegrand, integrate_2d

TIGHT = CubatureControls(rel_tol=1e-12, abs_tol=1e-14, max_evals=4_000_000)


def test_polynomial_exact():
    res = integrate_2d(lambda x, y: x * x * y * y,
                       (-1.0, -1.0), (1.0, 1.0))
    assert res.converged
    assert_allclose(res.value, 4.0 / 9.0, rtol=1e-13)


def test_constant_gives_area():
    res = integrate_2d(lambda x, y: np.full_like(x, 2.5),
                       (0.0, -2.0), (3.0, 1.0))
    assert res.converged
    assert_allclose(res.value, 2.5 * 3.0 * 3.0, rtol=1e-14)


def test_odd_integrand_vanishes():
    res = integrate_2d(lambda x, y: x ** 3 * y, (-2.0, -2.0), (2.0, 2.0),
                       CubatureControls(abs_tol=1e-10))
    assert abs(res.value) < 1e-10


def test_gaussian_mass():
    def f(x, y):
        return np.exp(-0.5 * (x * x + y * y)) / (2.0 * math.pi)

    res = integrate_2d(f, (-8.0, -8.0), (8.0, 8.0), TIGHT)
    assert res.converged
    assert_allclose(res.value, 1.0, rtol=1e-11)


def test_narrow_offset_bump():
    # a bump much smaller than the box must not be mistaken for zero
    sd = 0.05
    cx, cy = 0.6, -0.3

    def f(x, y):
        return np.exp(-0.5 * (((x - cx) / sd) ** 2 + ((y - cy) / sd) ** 2)) \
            / (2.0 * math.pi * sd * sd)

    res = integrate_2d(f, (-5.0, -5.0), (5.0, 5.0),
                       CubatureControls(rel_tol=1e-9, abs_tol=1e-12,
                                        max_evals=4_000_000))
    assert res.converged
    assert_allclose(res.value, 1.0, rtol=1e-8)


def test_error_estimate_covers_true_error():
    def f(x, y):
        return np.exp(x * y) * np.cos(x + y)

    res = integrate_2d(f, (0.0, 0.0), (1.0, 1.0),
                       CubatureControls(rel_tol=1e-8))
    tight = integrate_2d(f, (0.0, 0.0), (1.0, 1.0), TIGHT)
    assert res.converged and tight.converged
    assert abs(res.value - tight.value) <= 10.0 * max(res.error_estimate,
                                                      1e-15)


def test_budget_exhaustion_flags_not_raises():
    def f(x, y):
        return np.exp(-0.5 * ((x / 0.01) ** 2 + (y / 0.01) ** 2))

    res = integrate_2d(f, (-5.0, -5.0), (5.0, 5.0),
                       CubatureControls(rel_tol=1e-14, abs_tol=1e-30,
                                        max_evals=600))
    assert not res.converged
    assert math.isfinite(res.value)
    assert res.evals < 2000   # budget plus at most one refinement batch


def test_tighter_tolerance_costs_more():
    def f(x, y):
        return np.exp(-x * x - y * y + 0.3 * x * y)

    loose = integrate_2d(f, (-4.0, -4.0), (4.0, 4.0),
                         CubatureControls(rel_tol=1e-4))
    tight = integrate_2d(f, (-4.0, -4.0), (4.0, 4.0),
                         CubatureControls(rel_tol=1e-10))
    assert loose.converged and tight.converged
    assert tight.evals > loose.evals


def test_nonfinite_integrand_raises():
    def f(x, y):
        return np.where(x > 0.5, np.inf, 1.0)

    with pytest.raises(NonFiniteIntegrand):
        integrate_2d(f, (0.0, 0.0), (1.0, 1.0))


def test_bad_bounds_rejected():
    f = lambda x, y: x + y
    with pytest.raises(ValueError):
        integrate_2d(f, (0.0, 0.0), (0.0, 1.0))
    with pytest.raises(ValueError):
        integrate_2d(f, (0.0, 0.0), (np.inf, 1.0))
