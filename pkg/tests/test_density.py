import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, optimize, stats

from guarantor.density import Discrete, Lognormal, TruncatedLognormal, adaptive_quad
from guarantor.errors import ConfigError, NonConvergent

from conftest import M, S


def lognormal_pdf_quad(g, lo, hi):
    """Independent oracle: scipy quad against the lognormal density in x."""
    dist = stats.lognorm(s=S, scale=math.exp(M))
    val, _ = integrate.quad(lambda x: g(x) * dist.pdf(x), lo, hi, limit=400, epsabs=1e-14, epsrel=1e-12)
    return val


def test_cdf_limits_and_median(lognormal):
    assert lognormal.cdf(1e12) == pytest.approx(1.0, abs=1e-15)
    assert lognormal.cdf(0.0) == 0.0
    assert lognormal.cdf(math.exp(M)) == pytest.approx(0.5, abs=1e-15)
    # the median is exp(m) = 0.932102...
    assert math.exp(M) == pytest.approx(0.932102, abs=1e-6)


def test_discrete_cdf_and_quantile(two_state):
    assert two_state.cdf(1.0) == 0.5
    assert two_state.cdf(0.8) == 0.5
    assert two_state.quantile(0.7) == 1.2
    assert two_state.quantile(0.5) == 0.8
    assert two_state.quantile(0.0) == 0.8


def test_quantile_matches_bisection_oracle(lognormal):
    for u in (0.01, 0.3, 0.5, 0.77, 0.999):
        root = optimize.bisect(lambda x: lognormal.cdf(x) - u, 1e-6, 50.0, xtol=1e-14)
        assert lognormal.quantile(u) == pytest.approx(root, rel=1e-10)
    assert lognormal.quantile(0.5) == pytest.approx(0.932102, abs=1e-6)


def test_quantile_endpoints(lognormal):
    assert lognormal.quantile(0.0) == 0.0
    assert lognormal.quantile(1.0) == math.inf
    t = TruncatedLognormal(S, 3.0)
    assert t.quantile(1.0) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        lognormal.quantile(1.5)


def test_expect_identities(lognormal):
    assert lognormal.expect(lambda x: x) == pytest.approx(1.0, rel=1e-9)
    c = 1.3
    assert lognormal.expect(lambda x: np.ones_like(x), lo=c) == pytest.approx(lognormal.sf(c), rel=1e-9)
    ent = lognormal.expect(lambda x: x * np.log(x))
    assert ent == pytest.approx(M + S * S, rel=1e-9)
    assert ent == pytest.approx(0.0703125, rel=1e-9)


@pytest.mark.parametrize("g", [lambda x: np.ones_like(x), lambda x: x, lambda x: x * np.log(x),
                               lambda x: np.sqrt(x)])
def test_expect_against_scipy_quad(lognormal, g):
    for lo, hi in ((0.0, 0.7), (0.7, 1.9), (1.9, math.inf)):
        assert lognormal.expect(g, lo, hi) == pytest.approx(lognormal_pdf_quad(g, lo, hi), rel=1e-8, abs=1e-13)


def test_partial_mean_closed_form(lognormal):
    for c in (0.2, 0.93, 1.0, 2.5):
        expected = stats.norm.cdf((math.log(c) - M) / S - S)
        assert lognormal.partial_mean(0.0, c) == pytest.approx(expected, rel=1e-12)
        quad = lognormal.expect(lambda x: x, 0.0, c)
        assert quad == pytest.approx(expected, rel=1e-9)


def test_tail_price(lognormal, two_state):
    assert lognormal.tail_price(0.0) == pytest.approx(1.0, rel=1e-14)
    assert two_state.tail_price(1.0) == pytest.approx(0.6)
    t = TruncatedLognormal(S, 3.0)
    assert t.tail_price(3.0) == 0.0
    assert t.tail_price(5.0) == 0.0
    assert t.tail_price(1.4) == pytest.approx(t.expect(lambda x: x, lo=1.4), rel=1e-9)


@given(st.floats(1e-6, 1 - 1e-6))
def test_cdf_quantile_round_trip(u):
    for model in (Lognormal(S), Lognormal(1.2), TruncatedLognormal(S, 3.0)):
        assert model.cdf(model.quantile(u)) == pytest.approx(u, abs=1e-10)


@given(st.floats(0.05, 3.0))
def test_discrete_quantile_below_point(x):
    d = Discrete([0.5, 0.9, 1.3, 1.6], [0.2, 0.3, 0.3, 0.2], normalized=False)
    assert d.quantile(d.cdf(x)) <= x or d.cdf(x) == 0.0


@given(st.floats(0.1, 4.0))
def test_expect_additivity(c):
    model = Lognormal(S)
    for g in (lambda x: np.ones_like(x), lambda x: x, lambda x: x * np.log(x)):
        total = model.expect(g)
        split = model.expect(g, 0.0, c) + model.expect(g, c, math.inf)
        assert split == pytest.approx(total, rel=2e-9, abs=1e-14)


@given(st.floats(0.01, 5.0), st.floats(0.01, 5.0))
def test_tail_price_nonincreasing(a, b):
    lo, hi = sorted((a, b))
    for model in (Lognormal(S), TruncatedLognormal(S, 3.0)):
        assert model.tail_price(lo) >= model.tail_price(hi) - 1e-15


def test_truncation_mean_and_recentre():
    t = TruncatedLognormal(S, 3.0)
    assert t.mean < 1.0
    assert t.mean == pytest.approx(t.expect(lambda x: x), rel=1e-9)
    r = TruncatedLognormal(S, 3.0, recenter=True)
    assert r.mean == pytest.approx(1.0, abs=1e-12)
    assert r.sup == 3.0


def test_discrete_validation():
    with pytest.raises(ConfigError):
        Discrete([0.5, 2.0], [0.5, 0.5])
    with pytest.raises(ConfigError):
        Discrete([0.5, -1.0], [0.5, 0.5], normalized=False)
    with pytest.raises(ConfigError):
        Discrete([1.0, 1.0], [0.3, 0.3])
    d = Discrete([1.2, 0.8], [0.5, 0.5])
    assert list(d.xi) == [0.8, 1.2]
    with pytest.raises(ValueError):
        d.xi[0] = 1.0


def test_lognormal_rejects_unnormalised_mean():
    with pytest.raises(ConfigError):
        Lognormal(S, m=0.0)
    assert Lognormal(S, m=M).m == M


def test_adaptive_quad_failure():
    with pytest.raises(NonConvergent):
        adaptive_quad(lambda x: 1.0 / (x - 0.5) ** 2, 0.0, 1.0, max_intervals=50)
    with pytest.raises(NonConvergent):
        adaptive_quad(lambda x: np.full_like(x, np.nan), 0.0, 1.0)
    assert adaptive_quad(np.sin, 0.0, math.pi) == pytest.approx(2.0, rel=1e-12)


def test_sampling_mean(lognormal):
    rng = np.random.default_rng(3)
    x = lognormal.sample(rng, 200_000)
    assert abs(x.mean() - 1.0) < 4 * x.std() / math.sqrt(x.size)
    t = TruncatedLognormal(S, 3.0)
    y = t.sample(rng, 200_000)
    assert y.max() <= 3.0
    assert abs(y.mean() - t.mean) < 4 * y.std() / math.sqrt(y.size)


@pytest.mark.parametrize("model", [Lognormal(S), TruncatedLognormal(S, 3.0)], ids=["lognormal", "truncated"])
@pytest.mark.parametrize("lo,hi", [(0.0, 1.1), (0.8, 1.6), (2.5, math.inf)])
def test_sample_between_matches_conditional_cdf(model, lo, hi):
    xi = model.sample_between(np.random.default_rng(5), 20_000, lo, hi)
    assert xi.min() > lo and xi.max() <= min(hi, model.sup)
    mass = model.cdf(min(hi, model.sup)) - model.cdf(lo)
    cond = lambda x: (np.array([model.cdf(v) for v in x]) - model.cdf(lo)) / mass
    assert stats.kstest(xi, cond).pvalue > 1e-3


def test_sample_between_thin_upper_tail():
    model = TruncatedLognormal(S, 3.0)
    c = model.quantile(1 - 1e-7)
    xi = model.sample_between(np.random.default_rng(0), 1000, c, math.inf)
    assert np.all((xi > c) & (xi <= 3.0))
    assert xi.mean() == pytest.approx(model.tail_price(c) / model.sf(c), rel=1e-6)


def test_sample_between_discrete(two_state):
    xi = two_state.sample_between(np.random.default_rng(0), 100, 1.0, math.inf)
    assert np.all(xi == 1.2)
