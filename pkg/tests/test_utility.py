import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import optimize

from guarantor.errors import ConfigError
from guarantor.utility import Exponential, LogShifted, Power

UTILS = [Exponential(0.6), Exponential(2.0), Power(0.5), Power(0.3), LogShifted(0.5), LogShifted(2.0)]


def grid_conjugate(u, y, top=100.0, step=1e-4):
    """Brute-force oracle: sup over an x-grid, refined locally."""
    x = np.arange(0.0, top + step, step)
    vals = u.u(x) - x * y
    k = int(np.argmax(vals))
    lo, hi = x[max(k - 1, 0)], x[min(k + 1, x.size - 1)]
    res = optimize.minimize_scalar(lambda s: -(u.u(s) - s * y), bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-12})
    return max(vals[k], -res.fun)


def test_exponential_inverse_examples():
    u = Exponential(0.6)
    assert u.inverse_marginal(0.6) == 0.0
    assert u.inverse_marginal(0.7) == 0.0
    assert u.inverse_marginal(0.6 * math.exp(-0.6)) == pytest.approx(1.0, rel=1e-14)
    i = u.inverse_marginal(0.3)
    assert i == pytest.approx(math.log(2) / 0.6, rel=1e-14)
    assert i == pytest.approx(1.15525, abs=1e-5)
    assert u.u(i) == pytest.approx(0.5, rel=1e-14)
    # numeric inversion of u' by bisection
    root = optimize.bisect(lambda x: u.marginal(x) - 0.3, 0.0, 50.0, xtol=1e-14)
    assert i == pytest.approx(root, rel=1e-12)


def test_conjugate_examples():
    e = Exponential(0.6)
    assert e.conjugate(0.6) == 0.0
    assert e.conjugate(5.0) == 0.0
    v = e.conjugate(0.3)
    assert v == pytest.approx(0.5 - 0.3 * math.log(2) / 0.6, rel=1e-14)
    assert v == pytest.approx(0.15343, abs=1e-5)
    assert v == pytest.approx(grid_conjugate(e, 0.3), abs=1e-6)
    p = Power(0.5)
    assert p.conjugate(0.25) == pytest.approx(1.0, rel=1e-14)
    assert p.inverse_marginal(0.25) == pytest.approx(4.0, rel=1e-14)
    assert p.conjugate(0.25) == pytest.approx(grid_conjugate(p, 0.25), abs=1e-6)


@pytest.mark.parametrize("u", UTILS, ids=repr)
def test_conjugate_matches_grid_oracle(u):
    for y in (0.05, 0.3, 0.9, 1.7):
        assert u.conjugate(y) == pytest.approx(grid_conjugate(u, y, top=400.0, step=1e-3), abs=1e-6)


@pytest.mark.parametrize("u", UTILS, ids=repr)
def test_domain_errors(u):
    for bad in (0.0, -1.0):
        with pytest.raises(ValueError):
            u.inverse_marginal(bad)
        with pytest.raises(ValueError):
            u.conjugate(bad)


def test_parameter_validation():
    for ctor, bad in ((Exponential, 0.0), (Power, 1.0), (Power, 0.0), (LogShifted, -1.0)):
        with pytest.raises(ConfigError):
            ctor(bad)


def test_power_never_clips():
    p = Power(0.4)
    assert p.saturation == math.inf
    assert np.all(p.inverse_marginal(np.array([1e-3, 1.0, 1e3])) > 0)
    assert Exponential(0.6).inverse_marginal(0.61) == 0.0


@given(st.sampled_from(UTILS), st.floats(0.0, 50.0), st.floats(1e-3, 20.0))
def test_fenchel_inequality(u, x, y):
    assert u.u(x) <= u.conjugate(y) + x * y + 1e-12


@given(st.sampled_from(UTILS), st.floats(1e-3, 20.0))
def test_fenchel_equality_at_inverse(u, y):
    x = u.inverse_marginal(y)
    assert u.conjugate(y) == pytest.approx(u.u(x) - x * y, abs=1e-8)
    assert u.u_of_inverse_log(math.log(y)) == pytest.approx(u.u(x), abs=1e-12)


@given(st.sampled_from(UTILS), st.floats(1e-3, 20.0), st.floats(1e-3, 20.0))
def test_inverse_marginal_nonincreasing(u, a, b):
    lo, hi = sorted((a, b))
    assert u.inverse_marginal(lo) >= u.inverse_marginal(hi)
    assert u.conjugate(lo) >= u.conjugate(hi)


@given(st.sampled_from(UTILS), st.floats(1e-3, 1.0), st.floats(0.05, 5.0))
def test_bound_used_for_multiplier_continuity(u, lam, xi):
    i = u.inverse_marginal(lam * xi)
    assert u.u(i) <= u.conjugate(lam * xi) + lam * xi * i + 1e-10


@pytest.mark.parametrize("u", UTILS, ids=repr)
def test_basic_shape(u):
    x = np.linspace(0.01, 20.0, 201)
    assert u.u(0.0) == 0.0
    assert np.all(u.marginal(x) > 0)
    assert np.all(np.diff(u.marginal(x)) < 0)
    assert u.marginal(1e6) < 1e-2
