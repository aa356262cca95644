"""Threshold search and optimal-claim assembly.

The gains region is searched over lower sets {xi <= c}.  ``c`` is charted by
its quantile ``q = P(xi <= c)`` so that the search interval is compact even
for unbounded densities.  For each ``c`` the shortfall problem fixes the
subsidy, the gains problem is solved with the enlarged budget, and the
resulting value ``v(c)`` is maximised by a grid sweep plus bounded Brent
refinement.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy import optimize

from . import gains as gains_mod
from .density import DensityModel, Lognormal
from .errors import ConfigError
from .gains import GainsSolution
from .riskmeasure import Entropic, RiskSpec, Spectral, penalty_at_density
from .shortfall import (ShortfallSolution, existence_limit, shortfall_risk,
                        solve_shortfall, entropic_lhs)
from .utility import Exponential, UtilitySpec

__all__ = [
    "Numerics",
    "ProblemSpec",
    "Classification",
    "Plan",
    "BlackScholesMarket",
    "BSPayoff",
    "solve",
    "evaluate_c",
    "value_curve",
    "no_risk_benchmark",
    "bs_constants",
    "bs_payoff_map",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Numerics:
    grid_points: int = 256
    q_min: float = 1e-4
    q_max: float = 1.0 - 1e-6
    q_tol: float = 1e-6
    expect_tol: float = 1e-9
    root_tol: float = 1e-10
    mc_paths: int = 1_000_000
    seed: int | None = None


@dataclass(frozen=True)
class BlackScholesMarket:
    """One stock with dS = S (b dt + sigma dW) and zero interest rate."""

    S0: float
    b: float
    sigma: float
    T: float

    def __post_init__(self):
        if not (self.S0 > 0 and self.sigma > 0 and self.T > 0 and self.b > 0):
            raise ConfigError("Black-Scholes market needs S0, b, sigma, T > 0")

    @property
    def L(self) -> float:
        return self.b / self.sigma**2

    def density(self, **kw) -> Lognormal:
        return Lognormal.from_black_scholes(self.b, self.sigma, self.T, **kw)

    def xi_of_s(self, s):
        s = np.asarray(s, dtype=float)
        return (s * np.exp(self.T * (self.sigma**2 - self.b) / 2) / self.S0) ** (-self.L)

    def s_of_xi(self, xi):
        xi = np.asarray(xi, dtype=float)
        return self.S0 * np.exp(self.T * (self.b - self.sigma**2) / 2) * xi ** (-1.0 / self.L)


@dataclass(frozen=True)
class ProblemSpec:
    """A full problem instance.

    ``x0`` is the budget for the claim net of the guarantee, v0 - z E[xi].
    """

    v0: float
    z: float
    rho0: float
    density: DensityModel
    utility: UtilitySpec
    risk: RiskSpec
    numerics: Numerics = field(default_factory=Numerics)
    market: BlackScholesMarket | None = None
    check_integrability: bool = True

    def __post_init__(self):
        if self.z > self.v0:
            raise ConfigError(f"guarantee z={self.z} exceeds initial value v0={self.v0}")
        if self.rho0 < 0:
            raise ConfigError("risk budget rho0 must be non-negative")
        if self.check_integrability:
            for lam in (1e-3, 1.0, 1e3):
                # raises NonConvergent on failure
                c = gains_mod.value_bound(self.utility, self.density, lam, 0.0)
                if not math.isfinite(c):
                    raise ConfigError(f"E[v(lambda xi)] is not finite at lambda={lam}")

    @property
    def x0(self) -> float:
        return self.v0 - self.z * self.density.mean


class Classification(str, Enum):
    OPTIMAL = "OPTIMAL"
    NO_OPTIMUM = "NO_OPTIMUM"
    UNBOUNDED = "UNBOUNDED"


@dataclass(frozen=True)
class BSPayoff:
    """Optimal claim as a spread of two options on log(S_T)."""

    s_star: float
    L: float
    K1: float
    K2: float
    delta: float
    beta: float
    z: float = 0.0

    def x_star(self, s):
        ls = np.log(np.asarray(s, dtype=float))
        gain = np.maximum(self.L / self.delta * ls + self.K1, 0.0)
        loss = -self.beta * np.maximum(self.K2 - self.L * ls, 0.0)
        out = np.where(ls >= math.log(self.s_star), gain, loss)
        return float(out) if out.ndim == 0 else out

    def investor_payoff(self, s):
        """max(V_T, z) = z + (X*)^+."""
        return self.z + np.maximum(self.x_star(s), 0.0)

    def curve(self, s_grid) -> np.ndarray:
        """Columns S_T, x_star, investor_payoff."""
        s = np.asarray(s_grid, dtype=float)
        return np.column_stack([s, self.x_star(s), self.investor_payoff(s)])


@dataclass(frozen=True)
class Plan:
    classification: Classification
    spec: ProblemSpec = field(repr=False)
    c_star: float = math.nan
    q_star: float = math.nan
    log_lambda_star: float = math.nan
    shortfall: ShortfallSolution | None = None
    gains: GainsSolution | None = None
    value: float = math.nan
    epsilon: float = 0.0
    sup_value: float = math.nan
    existence_limit: float = math.nan
    penalty: float = math.nan
    penalty_computed: bool = False
    bs: BSPayoff | None = None
    diagnostics: dict = field(default_factory=dict, repr=False)
    checks: dict = field(default_factory=dict)
    reason: str = ""

    @property
    def lambda_star(self) -> float:
        return math.exp(self.log_lambda_star) if self.log_lambda_star < 710 else math.inf

    @property
    def eta_star(self) -> float:
        return self.shortfall.eta if self.shortfall is not None else math.nan

    @property
    def delta_star(self) -> float:
        if self.shortfall is not None:
            return self.shortfall.delta_hat
        return 0.0 if self.gains is not None else math.nan

    def claim(self, xi):
        """X*(xi) = I(lambda* xi) 1{xi <= c*} + Y*(xi)."""
        if self.gains is None:
            raise ValueError(f"{self.classification.value} plan carries no claim")
        z = self.gains.claim(self.spec.utility, xi)
        y = self.shortfall.claim(xi) if self.shortfall is not None else 0.0
        return z + y


def evaluate_c(spec: ProblemSpec, c: float, guess: float = 0.0,
               envelope: bool = False) -> tuple[ShortfallSolution | None, GainsSolution]:
    """Shortfall and gains solutions at threshold ``c`` (``c >= sup xi`` means no tail).

    ``envelope`` requests the spectral envelope diagnostic, which the value
    itself does not need.
    """
    model = spec.density
    if c >= model.sup or not model.sf(c) > 0:
        return None, gains_mod.solve_gains(model, spec.utility, math.inf, spec.x0, guess=guess)
    sh = solve_shortfall(model, spec.risk, spec.rho0, c, envelope=envelope)
    g = gains_mod.solve_gains(model, spec.utility, c, spec.x0 - sh.delta_hat, guess=guess)
    return sh, g


def value_curve(spec: ProblemSpec, cs) -> dict[str, np.ndarray]:
    """v(c), subsidy and multiplier over a list of thresholds."""
    rows = []
    guess = 0.0
    for c in cs:
        sh, g = evaluate_c(spec, float(c), guess)
        if math.isfinite(g.log_lambda):
            guess = g.log_lambda
        rows.append((c, spec.density.cdf(c), sh.delta_hat if sh else 0.0, g.lambda_, g.value))
    arr = np.array(rows, dtype=float).reshape(-1, 5)
    return dict(zip(("c", "q", "delta_c", "lambda_c", "v_c"), arr.T))


def no_risk_benchmark(spec: ProblemSpec) -> GainsSolution:
    """Best claim when no shortfall is allowed: X >= 0 priced at x0."""
    return gains_mod.solve_gains(spec.density, spec.utility, math.inf, spec.x0)


def _limit_value(spec: ProblemSpec, limit: float) -> float:
    """Supremum approached as c -> sup xi with the full spectral subsidy."""
    g = gains_mod.solve_gains(spec.density, spec.utility, math.inf, spec.x0 + spec.rho0 * limit)
    return g.value


def _plan_checks(spec: ProblemSpec, sh: ShortfallSolution | None, g: GainsSolution) -> dict:
    model, utility = spec.density, spec.utility
    c = g.c
    gain_price = gains_mod.budget(model, utility, c, g.log_lambda) if math.isfinite(g.log_lambda) else 0.0
    checks = {
        "lambda_budget_residual": (gain_price - g.x_plus) / max(abs(g.x_plus), 1e-300),
    }
    tail_price = 0.0
    risk = 0.0
    if sh is not None:
        pts = [sh.eta / sh.beta] if sh.kind == "entropic" and math.isfinite(sh.eta) else []
        tail_price = model.expect(lambda x: x * sh.claim(x), lo=sh.c, points=pts)
        risk = shortfall_risk(sh, model, spec.risk)
        if sh.delta_hat != 0:
            checks["delta_price_residual"] = (tail_price - sh.delta_hat) / abs(sh.delta_hat)
        if sh.kind == "entropic" and math.isfinite(sh.eta):
            target = math.expm1(sh.rho0 / sh.beta) + sh.alpha
            checks["eta_equation_residual"] = (entropic_lhs(model, sh.beta, sh.c, sh.eta) - target) / target
    budget_used = gain_price + tail_price
    value_direct = _direct_value(spec, g)
    checks.update(
        budget=budget_used,
        budget_residual=budget_used - spec.x0,
        risk=risk,
        risk_residual=risk - spec.rho0,
        value_direct=value_direct,
        value_residual=value_direct - g.value,
    )
    return checks


def _direct_value(spec: ProblemSpec, g: GainsSolution) -> float:
    """E[u((X*)^+)] by quadrature on the assembled gains claim."""
    if math.isinf(g.log_lambda):
        return 0.0
    utility = spec.utility
    pts = []
    if math.isfinite(utility.saturation):
        pts.append(utility.saturation / math.exp(max(g.log_lambda, -700)))
    return spec.density.expect(lambda x: utility.u(np.maximum(g.claim(utility, x), 0.0)),
                               0.0, g.c, points=pts)


def _assemble(spec, classification, q, sh, g, **kw) -> Plan:
    plan = Plan(
        classification=classification,
        spec=spec,
        c_star=g.c if sh is not None else spec.density.sup,
        q_star=q,
        log_lambda_star=g.log_lambda,
        shortfall=sh,
        gains=g,
        value=g.value,
        **kw,
    )
    checks = _plan_checks(spec, sh, g)
    bs = None
    if spec.market is not None and sh is not None and sh.kind == "entropic" and isinstance(spec.utility, Exponential):
        bs = bs_constants(plan.c_star, plan.lambda_star, sh.eta, spec.market,
                          spec.utility.delta, sh.beta, z=spec.z)
        checks["prob_no_loss"] = spec.density.cdf(plan.c_star)
    return replace(plan, checks=checks, bs=bs)


def solve(spec: ProblemSpec) -> Plan:
    """Optimal (or epsilon-optimal) claim over lower sets {xi <= c}."""
    model, risk, num = spec.density, spec.risk, spec.numerics
    if not model.atomless:
        raise ConfigError("threshold search needs an atomless density; use oracle.enumerate_solve")
    pen = penalty_at_density(risk, model)
    limit = existence_limit(model, risk) if isinstance(risk, Spectral) else math.nan
    common = dict(existence_limit=limit, penalty=pen.value, penalty_computed=pen.computed)

    if isinstance(risk, Spectral) and math.isinf(limit) and spec.rho0 > 0:
        return Plan(Classification.UNBOUNDED, spec, reason="existence limit infinite", **common)

    bench = no_risk_benchmark(spec)
    if spec.rho0 == 0:
        return _assemble(spec, Classification.OPTIMAL, 1.0, None, bench, sup_value=bench.value, **common)

    qs = np.linspace(num.q_min, num.q_max, num.grid_points)
    cs = np.array([model.quantile(q) for q in qs])
    vs = np.empty_like(qs)
    deltas = np.empty_like(qs)
    log_lams = np.empty_like(qs)
    guess = 0.0
    for k, c in enumerate(cs):
        sh, g = evaluate_c(spec, c, guess)
        guess = g.log_lambda
        vs[k], deltas[k], log_lams[k] = g.value, sh.delta_hat, g.log_lambda
    diagnostics = dict(q=qs, c=cs, delta_c=deltas, log_lambda_c=log_lams, v_c=vs)

    i = int(np.argmax(vs))  # first maximiser: smallest q on ties
    lo, hi = qs[max(i - 1, 0)], qs[min(i + 1, len(qs) - 1)]
    q_star, v_star = qs[i], vs[i]

    def neg_v(q):
        _, g = evaluate_c(spec, model.quantile(q), log_lams[i])
        return -g.value

    if hi > lo:
        res = optimize.minimize_scalar(neg_v, bounds=(lo, hi), method="bounded",
                                       options={"xatol": num.q_tol})
        if -res.fun > v_star:
            q_star, v_star = float(res.x), float(-res.fun)

    dq = qs[1] - qs[0] if len(qs) > 1 else 0.0
    pinned = q_star >= num.q_max - 2 * dq

    if isinstance(risk, Spectral):
        sup_value = _limit_value(spec, limit)
        if pinned or sup_value > v_star + 1e-9:
            q_eps = q_star if v_star >= vs[-1] else num.q_max
            sh, g = evaluate_c(spec, model.quantile(q_eps), log_lams[i], envelope=True)
            return _assemble(spec, Classification.NO_OPTIMUM, q_eps, sh, g,
                             epsilon=max(sup_value - g.value, 0.0), sup_value=sup_value,
                             diagnostics=diagnostics, reason="supremum approached as c -> sup xi",
                             **common)
    else:
        sup_value = v_star
        if pinned:
            log.warning("entropic maximiser pinned at q_max=%g; widen the quantile chart", num.q_max)

    if bench.value >= v_star:
        return _assemble(spec, Classification.OPTIMAL, 1.0, None, bench, sup_value=bench.value,
                         diagnostics=diagnostics, **common)
    sh, g = evaluate_c(spec, model.quantile(q_star), log_lams[i], envelope=True)
    return _assemble(spec, Classification.OPTIMAL, q_star, sh, g, sup_value=max(sup_value, g.value),
                     diagnostics=diagnostics, **common)


def bs_constants(c: float, lam: float, eta: float, market: BlackScholesMarket,
                 delta: float, beta: float, z: float = 0.0) -> BSPayoff:
    """Log-contract spread constants (s*, L, K1, K2) from (c*, lambda*, eta*)."""
    b, sig2, T = market.b, market.sigma**2, market.T
    L = market.L
    drift = b * (sig2 - b) * T / (2 * sig2)
    log_s0 = math.log(market.S0)
    s_star = float(market.s_of_xi(c))
    K1 = (drift - L * log_s0 - math.log(lam / delta)) / delta
    K2 = L * log_s0 - drift + math.log(beta / eta)
    return BSPayoff(s_star=s_star, L=L, K1=K1, K2=K2, delta=delta, beta=beta, z=z)


def bs_payoff_map(plan: Plan, market: BlackScholesMarket | None = None,
                  s_grid=None) -> tuple[BSPayoff, np.ndarray | None]:
    """Payoff descriptor in terms of S_T, plus an optional sampled curve."""
    spec = plan.spec
    market = market or spec.market
    if market is None or not isinstance(spec.utility, Exponential) or not isinstance(spec.risk, Entropic):
        raise ConfigError("payoff mapping needs a Black-Scholes market, exponential utility and entropic risk")
    if plan.gains is None or plan.shortfall is None:
        raise ConfigError("payoff mapping needs a plan with a finite threshold")
    payoff = bs_constants(plan.c_star, plan.lambda_star, plan.eta_star, market,
                          spec.utility.delta, spec.risk.beta, z=spec.z)
    curve = payoff.curve(s_grid) if s_grid is not None else None
    return payoff, curve
