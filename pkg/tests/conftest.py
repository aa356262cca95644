import math

import pytest
from hypothesis import HealthCheck, settings

from guarantor.density import Discrete, Lognormal
from guarantor.planner import BlackScholesMarket, ProblemSpec, solve
from guarantor.riskmeasure import Entropic
from guarantor.utility import Exponential

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# Black-Scholes market used throughout: b=0.15, sigma=0.4, T=1, S0=5
MARKET = BlackScholesMarket(S0=5.0, b=0.15, sigma=0.4, T=1.0)
S = 0.375
M = -S * S / 2


@pytest.fixture(scope="session")
def lognormal():
    return Lognormal(S)


@pytest.fixture(scope="session")
def two_state():
    return Discrete([0.8, 1.2], [0.5, 0.5])


@pytest.fixture(scope="session")
def base_spec():
    return ProblemSpec(v0=1.5, z=0.0, rho0=1.5, density=MARKET.density(),
                       utility=Exponential(0.6), risk=Entropic(1.0), market=MARKET)


@pytest.fixture(scope="session")
def base_plan(base_spec):
    return solve(base_spec)


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)
