"""Command-line front end.

Exit codes: 0 success (OPTIMAL, PASS), 1 verification FAIL, 2 bad input or
numerical failure, 3 NO_OPTIMUM, 4 UNBOUNDED.  Outputs go to the directory
named by ``$GUARANTOR_OUTPUT_DIR``, else ``outputs.dir`` in the config, else
the working directory.
"""
from __future__ import annotations

import argparse
import dataclasses
import io
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .errors import GuarantorError
from .oracle import claim_metrics, enumerate_solve, reconstruct_claim, verify_solution
from .planner import (Classification, bs_payoff_map, solve, value_curve)
from .riskmeasure import CVaR, Entropic, Spectral
from .utility import Exponential

__all__ = ["main", "EXIT_CODES", "OUTPUT_ENV"]

OUTPUT_ENV = "GUARANTOR_OUTPUT_DIR"
EXIT_CODES = {Classification.OPTIMAL: 0, Classification.NO_OPTIMUM: 3, Classification.UNBOUNDED: 4}
SWEEP_PARAMS = ("rho0", "c-grid", "delta", "beta")

log = logging.getLogger(__name__)


class UsageError(GuarantorError, ValueError):
    pass


def _output_dir(cfg: dict) -> Path:
    env = os.environ.get(OUTPUT_ENV)
    if env:
        return Path(env)
    return Path(cfg.get("outputs", {}).get("dir", "."))


def _prefix(cfg: dict, path: str) -> str:
    return cfg.get("outputs", {}).get("prefix") or Path(path).stem


def _csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(repr(float(x)) if not isinstance(x, str) else x for x in row) + "\n")
    return buf.getvalue()


def _payoff_csv(plan, spec) -> str:
    if spec.market is not None and plan.bs is not None:
        payoff, _ = bs_payoff_map(plan)
        s = np.geomspace(spec.market.S0 * 0.2, spec.market.S0 * 5.0, 401)
        return _csv(["S_T", "x_star", "investor_payoff"], payoff.curve(s))
    model = spec.density
    xi = np.array([model.quantile(q) for q in np.linspace(1e-4, 1 - 1e-4, 401)])
    return _csv(["xi", "x_star"], np.column_stack([xi, plan.claim(xi)]))


def cmd_solve(args) -> int:
    cfg = cfgmod.load_config(args.config)
    out = _output_dir(cfg)
    prefix = _prefix(cfg, args.config)
    if cfgmod.is_discrete(cfg):
        report = _oracle_report(cfgmod.build_oracle_instance(cfg))
        cfgmod.write_atomic(out / f"{prefix}_solution.json", cfgmod.dumps(report))
        cfgmod.write_atomic(out / f"{prefix}_payoff.csv",
                            _csv(["xi", "x_star"], zip(report["xi"], report["x_star"])))
        print(cfgmod.dumps(dict(classification=report["classification"], value=report["value"])), end="")
        return 0
    spec = cfgmod.build_spec(cfg)
    plan = solve(spec)
    doc = cfgmod.plan_to_dict(plan)
    cfgmod.write_atomic(out / f"{prefix}_solution.json", cfgmod.dumps(doc))
    if plan.gains is not None:
        cfgmod.write_atomic(out / f"{prefix}_payoff.csv", _payoff_csv(plan, spec))
    summary = {k: doc[k] for k in ("classification", "reason", "c_star", "q_star", "lambda_star",
                                   "eta_star", "delta_star", "value", "epsilon")}
    print(cfgmod.dumps(summary), end="")
    return EXIT_CODES[plan.classification]


def _oracle_report(inst) -> dict:
    res = enumerate_solve(inst)
    x = reconstruct_claim(inst, res)
    value, price, risk = claim_metrics(inst, x)
    n = inst.n
    return dict(
        schema="guarantor-oracle/1",
        classification=Classification.OPTIMAL.value,
        value=res.best_value,
        best_mask=res.best_mask,
        best_subset=list(res.best_subset()),
        lower_set_value=res.best_lower_value,
        lower_set_gap=res.lower_set_gap,
        x0=inst.x0,
        rho0=inst.rho0,
        xi=inst.density.xi,
        p=inst.density.p,
        x_star=x,
        claim_value=value,
        claim_price=price,
        claim_risk=risk,
        table=dict(
            mask=list(range(2**n)),
            delta=res.delta,
            x_plus=res.x_plus,
            value=res.value,
        ),
    )


def cmd_oracle(args) -> int:
    cfg = cfgmod.load_config(args.instance)
    report = _oracle_report(cfgmod.build_oracle_instance(cfg))
    out = _output_dir(cfg) / f"{_prefix(cfg, args.instance)}_oracle.json"
    cfgmod.write_atomic(out, cfgmod.dumps(report))
    print(cfgmod.dumps({k: report[k] for k in ("value", "best_subset", "lower_set_gap")}), end="")
    return 0


def cmd_verify(args) -> int:
    cfg = cfgmod.load_config(args.config)
    seed = cfg.get("numerics", {}).get("seed")
    if seed is None:
        raise UsageError("verification needs numerics.seed in the config")
    try:
        with open(args.solution) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed solution JSON: {exc}") from exc
    out = _output_dir(cfg) / f"{_prefix(cfg, args.config)}_verification.json"
    if cfgmod.is_discrete(cfg):
        inst = cfgmod.build_oracle_instance(cfg)
        x = np.array([cfgmod.from_jsonable(v) for v in doc["x_star"]], dtype=float)
        value, price, risk = claim_metrics(inst, x)
        tol = 1e-9
        report = dict(budget=dict(estimate=price, se=0.0, target=inst.x0, passed=price <= inst.x0 + tol),
                      risk=dict(estimate=risk, se=0.0, target=inst.rho0, passed=risk <= inst.rho0 + tol),
                      value=dict(estimate=value, se=0.0, target=doc["value"],
                                 passed=abs(value - doc["value"]) <= tol))
        report["passed"] = all(report[k]["passed"] for k in ("budget", "risk", "value"))
    else:
        spec = cfgmod.build_spec(cfg)
        plan = cfgmod.plan_from_dict(spec, doc)
        paths = spec.numerics.mc_paths
        report = verify_solution(spec, plan, paths, seed).to_dict()
        report["reported_value"] = plan.value
    cfgmod.write_atomic(out, cfgmod.dumps(report))
    print(cfgmod.dumps(report), end="")
    return 0 if report["passed"] else 1


def _parse_values(text: str) -> list[float]:
    items = [v.strip() for v in text.split(",") if v.strip()]
    if not items:
        raise UsageError("--values needs at least one number")
    try:
        return [float(v) for v in items]
    except ValueError as exc:
        raise UsageError(f"bad --values entry: {exc}") from exc


def cmd_sweep(args) -> int:
    if args.param not in SWEEP_PARAMS:
        raise UsageError(f"unknown sweep parameter {args.param!r}; choose from {', '.join(SWEEP_PARAMS)}")
    values = _parse_values(args.values)
    cfg = cfgmod.load_config(args.config)
    spec = cfgmod.build_spec(cfg)
    out = _output_dir(cfg) / f"{_prefix(cfg, args.config)}_sweep_{args.param}.csv"
    if args.param == "c-grid":
        curve = value_curve(spec, values)
        cols = ("c", "q", "delta_c", "lambda_c", "v_c")
        text = _csv(list(cols), np.column_stack([curve[k] for k in cols]))
    else:
        rows = []
        for v in values:
            plan = solve(_vary(spec, args.param, v))
            rows.append((v, plan.classification.value, plan.value, plan.c_star, plan.q_star,
                         plan.lambda_star if math.isfinite(plan.log_lambda_star) else math.nan,
                         plan.delta_star))
        header = [args.param, "classification", "v_star", "c_star", "q_star", "lambda_star", "delta_star"]
        text = _csv(header, rows)
    cfgmod.write_atomic(out, text)
    print(text, end="")
    return 0


def _vary(spec, param: str, v: float):
    if param == "rho0":
        return dataclasses.replace(spec, rho0=v)
    if param == "delta":
        if not isinstance(spec.utility, Exponential):
            raise UsageError("delta sweeps need exponential utility")
        return dataclasses.replace(spec, utility=Exponential(v))
    if isinstance(spec.risk, Entropic):
        return dataclasses.replace(spec, risk=Entropic(v))
    if isinstance(spec.risk, Spectral) and spec.risk.is_cvar:
        return dataclasses.replace(spec, risk=CVaR(v))
    raise UsageError("beta sweeps need entropic or CVaR risk")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="guarantor", description="Optimal guaranteed-fund payoffs.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve", help="solve a config and write solution JSON and payoff CSV")
    p.add_argument("config")
    p.set_defaults(func=cmd_solve)
    p = sub.add_parser("verify", help="Monte Carlo check of a written solution")
    p.add_argument("config")
    p.add_argument("solution")
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("oracle", help="enumerate all gains regions of a discrete instance")
    p.add_argument("instance")
    p.set_defaults(func=cmd_oracle)
    p = sub.add_parser("sweep", help="tabulate results over a parameter")
    p.add_argument("config")
    p.add_argument("--param", required=True)
    p.add_argument("--values", required=True, help="comma-separated numbers")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (GuarantorError, ValueError, KeyError, OSError) as exc:
        err = dict(error=type(exc).__name__, message=str(exc))
        sys.stderr.write(json.dumps(err) + "\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
