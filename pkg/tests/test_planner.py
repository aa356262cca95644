import dataclasses
import math

import numpy as np
import pytest

from guarantor.density import Discrete, TruncatedLognormal
from guarantor.errors import ConfigError
from guarantor.planner import (Classification, Numerics, ProblemSpec, bs_constants, bs_payoff_map,
                               evaluate_c, no_risk_benchmark, solve, value_curve)
from guarantor.riskmeasure import CVaR, Entropic, eval_risk
from guarantor.utility import Exponential

from conftest import MARKET, S, rel

TRUNC = TruncatedLognormal(S, 3.0)
COARSE = Numerics(grid_points=64)


def cvar_spec(beta, v0, rho0, numerics=Numerics()):
    return ProblemSpec(v0=v0, z=0.0, rho0=rho0, density=TRUNC, utility=Exponential(0.6),
                       risk=CVaR(beta), numerics=numerics)


def test_payoff_constants_fixture():
    bs = bs_constants(2.72293, 0.0596571, 0.185501, MARKET, 0.6, 1.0)
    for got, want in ((bs.s_star, 1.70907), (bs.L, 0.9375), (bs.K1, 1.34026), (bs.K2, 3.18886)):
        assert rel(got, want) < 1e-4


def test_state_price_round_trip():
    bs = bs_constants(2.72293, 0.0596571, 0.185501, MARKET, 0.6, 1.0)
    assert float(MARKET.xi_of_s(bs.s_star)) == pytest.approx(2.72293, rel=1e-8)


def test_guarantee_floor_in_investor_payoff():
    bs = bs_constants(2.72293, 0.0596571, 0.185501, MARKET, 0.6, 1.0, z=0.2)
    s = np.array([0.5, 1.0, 1.5])  # below s*, where X* <= 0
    assert np.all(bs.x_star(s) <= 0)
    assert np.allclose(bs.investor_payoff(s), 0.2)


def test_payoff_matches_claim_in_state_space(base_plan):
    payoff, curve = bs_payoff_map(base_plan, s_grid=np.linspace(0.5, 20.0, 400))
    xi = MARKET.xi_of_s(curve[:, 0])
    assert np.allclose(curve[:, 1], base_plan.claim(xi), atol=1e-9)
    assert np.allclose(curve[:, 2], np.maximum(curve[:, 1], 0.0))


def test_reference_config_optimal(base_spec, base_plan):
    plan = base_plan
    assert plan.classification == Classification.OPTIMAL
    ch = plan.checks
    assert abs(ch["lambda_budget_residual"]) < 1e-8
    assert abs(ch["eta_equation_residual"]) < 1e-8
    assert abs(ch["delta_price_residual"]) < 1e-6
    assert abs(ch["budget_residual"]) < 1e-6
    assert abs(ch["risk_residual"]) < 1e-6
    assert abs(ch["value_residual"]) < 1e-6
    assert plan.value > no_risk_benchmark(base_spec).value
    print(f"recomputed c*={plan.c_star:.6g} lambda*={plan.lambda_star:.6g} eta*={plan.eta_star:.6g} "
          f"delta*={plan.delta_star:.6g} P(no loss)={ch['prob_no_loss']:.6g}")


def test_local_optimality(base_spec, base_plan):
    model = base_spec.density
    for dq in (-1e-3, 1e-3):
        _, g = evaluate_c(base_spec, model.quantile(base_plan.q_star + dq))
        assert g.value <= base_plan.value + 1e-9


def test_value_curve_peak_matches_solve(base_spec, base_plan):
    qs = np.linspace(0.5, 0.99, 50)
    curve = value_curve(base_spec, [base_spec.density.quantile(q) for q in qs])
    assert set(curve) == {"c", "q", "delta_c", "lambda_c", "v_c"}
    k = int(np.argmax(curve["v_c"]))
    assert 0 < k < len(qs) - 1
    assert curve["v_c"][k] <= base_plan.value + 1e-12
    assert base_plan.value - curve["v_c"][k] < 1e-3


def test_zero_risk_budget_is_benchmark(base_spec):
    spec = dataclasses.replace(base_spec, rho0=0.0)
    plan = solve(spec)
    bench = no_risk_benchmark(spec)
    assert plan.classification == Classification.OPTIMAL
    assert plan.value == pytest.approx(bench.value, rel=1e-12)
    xi = spec.density.sample(np.random.default_rng(0), 1000)
    assert np.all(plan.claim(xi) >= 0)


def test_zero_wealth_benchmark(base_spec):
    spec = dataclasses.replace(base_spec, v0=0.0)
    assert no_risk_benchmark(spec).value == 0.0


def test_guard_rails(base_spec):
    with pytest.raises(ConfigError):
        dataclasses.replace(base_spec, z=2.0)
    with pytest.raises(ConfigError):
        dataclasses.replace(base_spec, rho0=-1.0)
    spec = dataclasses.replace(base_spec, density=Discrete([0.8, 1.2], [0.5, 0.5]), market=None)
    with pytest.raises(ConfigError):
        solve(spec)


def test_guarantee_reduces_budget(base_spec):
    spec = dataclasses.replace(base_spec, z=0.5)
    assert spec.x0 == pytest.approx(1.0)


def test_cvar_lognormal_unbounded(base_spec):
    plan = solve(dataclasses.replace(base_spec, risk=CVaR(0.5)))
    assert plan.classification == Classification.UNBOUNDED
    assert plan.existence_limit == math.inf
    assert "existence limit" in plan.reason
    with pytest.raises(ValueError):
        plan.claim(1.0)


def test_cvar_interior_optimum():
    spec = cvar_spec(0.1, 0.2, 2.0)
    plan = solve(spec)
    assert plan.classification == Classification.OPTIMAL
    assert 0.1 < plan.q_star < 0.95
    sh = plan.shortfall
    xi = np.linspace(0.05, 2.99, 400)
    lam = plan.lambda_star
    expected = np.where(xi <= plan.c_star, spec.utility.inverse_marginal(lam * xi),
                        -spec.rho0 / spec.risk.phi_integral(sh.alpha))
    assert np.allclose(plan.claim(xi), expected, atol=1e-12)
    assert abs(plan.checks["budget_residual"]) < 1e-6
    assert abs(plan.checks["risk_residual"]) < 1e-6
    assert plan.value >= plan.sup_value - 1e-12


def test_cvar_boundary_no_optimum():
    spec = cvar_spec(0.5, 1.5, 1.5)
    plan = solve(spec)
    assert plan.classification == Classification.NO_OPTIMUM
    assert plan.epsilon > 0
    assert plan.value + plan.epsilon >= plan.sup_value - 1e-12
    assert plan.checks["budget_residual"] <= 1e-6
    assert plan.checks["risk"] <= spec.rho0 + 1e-6


def test_comparative_statics(base_spec):
    vals_rho = [solve(dataclasses.replace(base_spec, rho0=r, numerics=COARSE)).value for r in (0.0, 0.75, 1.5)]
    assert vals_rho == sorted(vals_rho)
    vals_x = [solve(dataclasses.replace(base_spec, v0=v, numerics=COARSE)).value for v in (0.5, 1.0, 1.5)]
    assert vals_x == sorted(vals_x)


def test_payoff_map_needs_entropic(base_spec):
    plan = solve(cvar_spec(0.1, 0.2, 2.0, COARSE))
    with pytest.raises(ConfigError):
        bs_payoff_map(plan, MARKET)


def test_claim_risk_via_sample(base_plan, base_spec):
    xi = base_spec.density.sample(np.random.default_rng(5), 200_000)
    y = np.minimum(base_plan.claim(xi), 0.0)
    assert eval_risk(Entropic(1.0), y) == pytest.approx(1.5, abs=0.02)
