"""JSON configs and lossless (de)serialisation of plans.

Non-finite floats are written as the strings ``"Infinity"``, ``"-Infinity"``
and ``"NaN"`` so the files stay valid JSON.  Finite floats use Python's
shortest round-trip repr, which reproduces every value bit for bit.
"""
from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any

import numpy as np

from .density import Discrete, Lognormal, TruncatedLognormal
from .errors import ConfigError
from .gains import GainsSolution
from .planner import BlackScholesMarket, BSPayoff, Classification, Numerics, Plan, ProblemSpec
from .riskmeasure import CVaR, Entropic, Spectral
from .shortfall import ShortfallSolution, ShortfallStatus
from .utility import Exponential, LogShifted, Power

__all__ = [
    "SCHEMA",
    "load_config",
    "parse_config",
    "build_spec",
    "build_oracle_instance",
    "is_discrete",
    "plan_to_dict",
    "plan_from_dict",
    "to_jsonable",
    "from_jsonable",
    "dumps",
    "write_atomic",
]

SCHEMA = "guarantor-config/1"
SOLUTION_SCHEMA = "guarantor-solution/1"

_NONFINITE = {"Infinity": math.inf, "-Infinity": -math.inf, "NaN": math.nan}


def to_jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "NaN"
        if math.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        return x
    if hasattr(obj, "value") and isinstance(obj, (Classification, ShortfallStatus)):
        return obj.value
    return obj


def from_jsonable(x: Any) -> Any:
    if isinstance(x, str) and x in _NONFINITE:
        return _NONFINITE[x]
    return x


def _num(d: dict, key: str, default=None) -> float:
    if key not in d:
        if default is None:
            raise ConfigError(f"missing field {key!r}")
        return default
    v = from_jsonable(d[key])
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"field {key!r} must be a number")
    return float(v)


def dumps(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_atomic(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    return parse_config(cfg)


def parse_config(cfg: Any) -> dict:
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    schema = cfg.get("schema", SCHEMA)
    if schema != SCHEMA:
        raise ConfigError(f"unsupported schema {schema!r}, expected {SCHEMA!r}")
    for key in ("market", "risk", "utility"):
        if not isinstance(cfg.get(key), dict):
            raise ConfigError(f"missing section {key!r}")
    return cfg


def is_discrete(cfg: dict) -> bool:
    return cfg["market"].get("kind") == "discrete"


def _utility(d: dict):
    kind = d.get("kind")
    if kind == "exponential":
        return Exponential(_num(d, "delta"))
    if kind == "power":
        return Power(_num(d, "gamma"))
    if kind in ("log", "log_shifted"):
        return LogShifted(_num(d, "a"))
    raise ConfigError(f"unknown utility kind {kind!r}")


def _risk(d: dict):
    kind = d.get("kind")
    if kind == "entropic":
        return Entropic(_num(d, "beta"))
    if kind == "cvar":
        return CVaR(_num(d, "beta"))
    if kind == "spectral":
        atoms = d.get("atoms")
        if not atoms:
            raise ConfigError("spectral risk needs a non-empty 'atoms' list of [weight, level]")
        return Spectral(tuple((float(w), float(b)) for w, b in atoms))
    raise ConfigError(f"unknown risk kind {kind!r}")


def _numerics(d: dict) -> Numerics:
    base = Numerics()
    seed = d.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
        raise ConfigError("numerics.seed must be an integer")
    return Numerics(
        grid_points=int(d.get("grid_points", base.grid_points)),
        q_min=_num(d, "q_min", base.q_min),
        q_max=_num(d, "q_max", base.q_max),
        q_tol=_num(d, "q_tol", base.q_tol),
        expect_tol=_num(d, "expect_tol", base.expect_tol),
        root_tol=_num(d, "root_tol", base.root_tol),
        mc_paths=int(d.get("mc_paths", base.mc_paths)),
        seed=seed,
    )


def _density(m: dict, numerics: Numerics):
    kind = m.get("kind")
    tol = numerics.expect_tol
    upper = m.get("truncation")
    market = None
    if kind == "black_scholes":
        market = BlackScholesMarket(_num(m, "S0"), _num(m, "b"), _num(m, "sigma"), _num(m, "T"))
        s = market.b * math.sqrt(market.T) / market.sigma
    elif kind == "lognormal":
        s = _num(m, "s")
    elif kind == "discrete":
        states = m.get("states")
        if not states:
            raise ConfigError("discrete market needs 'states' as [xi, p] pairs")
        return Discrete.from_pairs([(float(x), float(p)) for x, p in states],
                                   normalized=bool(m.get("normalized", True))), None
    else:
        raise ConfigError(f"unknown market kind {kind!r}")
    if upper is not None:
        return TruncatedLognormal(s, float(upper), recenter=bool(m.get("recenter", False)),
                                  expect_tol=tol), market
    return Lognormal(s, expect_tol=tol), market


def build_spec(cfg: dict) -> ProblemSpec:
    numerics = _numerics(cfg.get("numerics", {}))
    density, market = _density(cfg["market"], numerics)
    return ProblemSpec(
        v0=_num(cfg, "v0"),
        z=_num(cfg, "z", 0.0),
        rho0=_num(cfg, "rho0"),
        density=density,
        utility=_utility(cfg["utility"]),
        risk=_risk(cfg["risk"]),
        numerics=numerics,
        market=market,
    )


def build_oracle_instance(cfg: dict):
    from .oracle import OracleInstance

    numerics = _numerics(cfg.get("numerics", {}))
    density, _ = _density(cfg["market"], numerics)
    if not isinstance(density, Discrete):
        raise ConfigError("oracle instances need a discrete market")
    v0, z = _num(cfg, "v0"), _num(cfg, "z", 0.0)
    if z > v0:
        raise ConfigError(f"guarantee z={z} exceeds initial value v0={v0}")
    x0 = v0 - z * density.mean
    return OracleInstance(density, _utility(cfg["utility"]), _risk(cfg["risk"]), x0, _num(cfg, "rho0"))


# --- plans -------------------------------------------------------------------


def _shortfall_dict(sh: ShortfallSolution | None):
    if sh is None:
        return None
    return dict(kind=sh.kind, c=sh.c, alpha=sh.alpha, rho0=sh.rho0, delta=sh.delta,
                delta_hat=sh.delta_hat, status=sh.status.value, beta=sh.beta, eta=sh.eta,
                level=sh.level, envelope_z=sh.envelope_z)


def plan_to_dict(plan: Plan) -> dict:
    sh, g = plan.shortfall, plan.gains
    out = dict(
        schema=SOLUTION_SCHEMA,
        classification=plan.classification.value,
        reason=plan.reason,
        c_star=plan.c_star,
        q_star=plan.q_star,
        log_lambda_star=plan.log_lambda_star,
        lambda_star=plan.lambda_star if math.isfinite(plan.log_lambda_star) else math.nan,
        eta_star=plan.eta_star,
        spectral_level=sh.level if sh is not None and sh.kind == "spectral" else math.nan,
        delta_star=plan.delta_star,
        value=plan.value,
        epsilon=plan.epsilon,
        sup_value=plan.sup_value,
        existence_limit=plan.existence_limit,
        penalty=plan.penalty,
        penalty_computed=plan.penalty_computed,
        shortfall=_shortfall_dict(sh),
        gains=None if g is None else dict(c=g.c, x_plus=g.x_plus, log_lambda=g.log_lambda, value=g.value),
        bs_constants=None if plan.bs is None else dict(
            s_star=plan.bs.s_star, L=plan.bs.L, K1=plan.bs.K1, K2=plan.bs.K2,
            delta=plan.bs.delta, beta=plan.bs.beta, z=plan.bs.z),
        checks=plan.checks,
        diagnostics={k: v for k, v in plan.diagnostics.items()},
    )
    return to_jsonable(out)


def _floats(d: dict) -> dict:
    return {k: from_jsonable(v) for k, v in d.items()}


def plan_from_dict(spec: ProblemSpec, d: dict) -> Plan:
    """Rebuild a plan written by :func:`plan_to_dict` against ``spec``."""
    if not isinstance(d, dict) or d.get("schema") != SOLUTION_SCHEMA:
        raise ConfigError(f"not a {SOLUTION_SCHEMA} document")
    try:
        sh = None
        if d.get("shortfall") is not None:
            s = _floats(d["shortfall"])
            s["status"] = ShortfallStatus(s["status"])
            sh = ShortfallSolution(**s)
        g = GainsSolution(**_floats(d["gains"])) if d.get("gains") is not None else None
        bs = BSPayoff(**_floats(d["bs_constants"])) if d.get("bs_constants") is not None else None
        f = _floats(d)
        return Plan(
            classification=Classification(d["classification"]),
            spec=spec,
            c_star=f["c_star"],
            q_star=f["q_star"],
            log_lambda_star=f["log_lambda_star"],
            shortfall=sh,
            gains=g,
            value=f["value"],
            epsilon=f["epsilon"],
            sup_value=f["sup_value"],
            existence_limit=f["existence_limit"],
            penalty=f["penalty"],
            penalty_computed=bool(d["penalty_computed"]),
            bs=bs,
            diagnostics={k: np.array([from_jsonable(x) for x in v], dtype=float)
                         for k, v in d.get("diagnostics", {}).items()},
            checks=_floats(d.get("checks", {})),
            reason=d.get("reason", ""),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed solution document: {exc}") from exc
