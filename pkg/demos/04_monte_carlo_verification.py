"""Independent Monte Carlo check of solved plans.

A correct plan passes its budget, risk and value checks; perturbing the
gains multiplier by 10% breaks the budget and is caught.
"""
import dataclasses
import math
from pathlib import Path

from guarantor.config import build_spec, load_config
from guarantor.oracle import verify_solution
from guarantor.planner import solve

here = Path(__file__).parent / "configs"


def report(name, rep):
    print(f"{name:<28} {'PASS' if rep.passed else 'FAIL'}")
    for key in ("budget", "risk", "value"):
        e = getattr(rep, key)
        print(f"    {key:<7} {e.estimate:.6f} +- {e.se:.1e}  target {e.target:.6f}  {'ok' if e.passed else 'x'}")


for cfg_name in ("entropic_black_scholes", "cvar_truncated"):
    cfg = load_config(here / f"{cfg_name}.json")
    spec = build_spec(cfg)
    plan = solve(spec)
    report(f"{cfg_name} ({plan.classification.value})",
           verify_solution(spec, plan, spec.numerics.mc_paths, spec.numerics.seed))

spec = build_spec(load_config(here / "entropic_black_scholes.json"))
plan = solve(spec)
g = dataclasses.replace(plan.gains, log_lambda=plan.gains.log_lambda + math.log(1.1))
bad = dataclasses.replace(plan, gains=g, log_lambda_star=g.log_lambda)
report("lambda* x 1.1", verify_solution(spec, bad, spec.numerics.mc_paths, spec.numerics.seed))
