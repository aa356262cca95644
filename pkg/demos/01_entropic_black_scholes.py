"""Entropic guarantee in a Black-Scholes market.

Solves the reference configuration, prints the optimal threshold and
multipliers, and tabulates the fund payoff against the terminal stock price
next to the unconstrained (no-subsidy) benchmark.
"""
from pathlib import Path

import numpy as np

from guarantor.config import build_spec, load_config
from guarantor.planner import bs_payoff_map, no_risk_benchmark, solve

cfg = load_config(Path(__file__).parent / "configs" / "entropic_black_scholes.json")
spec = build_spec(cfg)
plan = solve(spec)
bench = no_risk_benchmark(spec)

print(f"classification   {plan.classification.value}")
print(f"threshold c*     {plan.c_star:.6f}  (P(xi <= c*) = {plan.checks['prob_no_loss']:.4f})")
print(f"lambda*, eta*    {plan.lambda_star:.6f}, {plan.eta_star:.6f}")
print(f"subsidy Delta*   {plan.delta_star:.6f}")
print(f"value            {plan.value:.6f} vs benchmark {bench.value:.6f}")
print(f"risk of shortfall {plan.checks['risk']:.6f} (budget {spec.rho0})")

payoff, _ = bs_payoff_map(plan)
print(f"\nspread constants s*={payoff.s_star:.5f} L={payoff.L:.5f} K1={payoff.K1:.5f} K2={payoff.K2:.5f}")
print(f"\n{'S_T':>8} {'X*':>10} {'benchmark':>10}")
for s in np.geomspace(1.0, 20.0, 12):
    xi = float(spec.market.xi_of_s(s))
    print(f"{s:8.3f} {float(payoff.x_star(s)):10.4f} {float(bench.claim(spec.utility, xi)):10.4f}")
