"""Cheapest admissible shortfall on the tail set {xi > c}.

For a threshold ``c`` we minimise E[xi Y] over claims Y <= 0 supported on
{xi > c} with rho(Y) <= rho0.  The optimum value (the "subsidy") is
non-positive; its negative is the extra capital the risk budget buys.

Entropic risk has an explicit minimiser parameterised by a scalar ``eta``
found by monotone root bracketing.  For spectral risk the lower-set claim is
a constant loss on the whole tail, and the envelope over smaller tails is
reported alongside it as a diagnostic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import optimize

from .density import DensityModel
from .errors import BracketFailure, InfeasibleTail
from .riskmeasure import Entropic, RiskSpec, Spectral, eval_risk

__all__ = [
    "ShortfallStatus",
    "ShortfallSolution",
    "solve_entropic",
    "solve_spectral",
    "solve_shortfall",
    "existence_limit",
    "spectral_ratio",
    "shortfall_risk",
    "bracket_decreasing_root",
]

ENVELOPE_GRID = 512
LHOPITAL_Z = 1e-12
# search window for eta, in log space: [1e-30, 1e30]
_LOG_ETA_BOUND = math.log(1e30)


class ShortfallStatus(str, Enum):
    FINITE = "FINITE"
    MINUS_INFINITY = "MINUS_INFINITY"


@dataclass(frozen=True)
class ShortfallSolution:
    """Solution of the shortfall problem at threshold ``c``.

    ``delta`` is the infimum over the tail set itself (for spectral risk: the
    envelope over all smaller upper tails); ``delta_hat`` is the value of the
    lower-set claim actually used by the planner.  They coincide for entropic
    risk.
    """

    kind: str
    c: float
    alpha: float
    rho0: float
    delta: float
    delta_hat: float
    status: ShortfallStatus = ShortfallStatus.FINITE
    beta: float = math.nan
    eta: float = math.nan
    level: float = 0.0
    envelope_z: float = math.nan

    def claim(self, xi):
        """Y*(xi): zero on {xi <= c}, non-positive on the tail."""
        xi = np.asarray(xi, dtype=float)
        tail = xi > self.c
        if self.kind == "entropic":
            if math.isinf(self.eta):
                y = np.zeros_like(xi)
            else:
                with np.errstate(divide="ignore"):
                    y = -self.beta * np.maximum(np.log(self.beta * xi / self.eta), 0.0)
        else:
            y = np.full_like(xi, -self.level)
        out = np.where(tail, y, 0.0)
        return float(out) if out.ndim == 0 else out


def bracket_decreasing_root(f, t0: float, lo_bound: float, hi_bound: float,
                            xtol: float = 1e-14) -> float:
    """Root of a continuous nonincreasing ``f`` on ``[lo_bound, hi_bound]``.

    Expands geometrically from ``t0`` until the sign changes, then runs Brent.
    """
    t0 = min(max(t0, lo_bound), hi_bound)
    f0 = f(t0)
    if f0 == 0:
        return t0
    step = 1.0
    if f0 > 0:
        a, b = t0, t0
        while True:
            b = min(a + step, hi_bound)
            fb = f(b)
            if fb <= 0:
                break
            if b >= hi_bound:
                raise BracketFailure(f"no sign change up to {hi_bound}")
            a, step = b, 2 * step
        if fb == 0:
            return b
    else:
        a, b = t0, t0
        while True:
            a = max(b - step, lo_bound)
            fa = f(a)
            if fa >= 0:
                break
            if a <= lo_bound:
                raise BracketFailure(f"no sign change down to {lo_bound}")
            b, step = a, 2 * step
        if fa == 0:
            return a
    return optimize.brentq(f, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=500)


def _tail_mass(model: DensityModel, c: float) -> float:
    alpha = model.sf(c)
    if not alpha > 0:
        raise InfeasibleTail(f"P(xi > {c}) = 0")
    return alpha


def entropic_lhs(model: DensityModel, beta: float, c: float, eta: float) -> float:
    """E[(beta xi / eta v 1) 1{xi > c}] using closed-form partial moments."""
    k = max(c, eta / beta)
    return beta / eta * model.partial_mean(k, math.inf) + (model.cdf(k) - model.cdf(c))


def solve_entropic(model: DensityModel, beta: float, rho0: float, c: float) -> ShortfallSolution:
    """Optimal shortfall for the entropic risk measure at threshold ``c``."""
    alpha = _tail_mass(model, c)
    if rho0 < 0:
        raise ValueError("risk budget must be non-negative")
    if rho0 == 0:
        return ShortfallSolution("entropic", c, alpha, rho0, 0.0, 0.0, beta=beta, eta=math.inf)
    target = math.expm1(rho0 / beta) + alpha

    def resid(log_eta):
        return entropic_lhs(model, beta, c, math.exp(log_eta)) - target

    t0 = math.log(beta * max(c, 1e-300))
    log_eta = bracket_decreasing_root(resid, t0, -_LOG_ETA_BOUND, _LOG_ETA_BOUND)
    eta = math.exp(log_eta)
    k = max(c, eta / beta)
    log_ratio = math.log(beta) - log_eta
    delta = -beta * model.expect(lambda x: x * (np.log(x) + log_ratio), lo=k)
    delta = min(delta, 0.0)
    return ShortfallSolution("entropic", c, alpha, rho0, delta, delta, beta=beta, eta=eta)


def existence_limit(model: DensityModel, spec: Spectral) -> float:
    """lim_{x->0+} F^{-1}(1 - x) / phi(x) = esssup(xi) / phi(0+)."""
    return model.sup / spec.phi0


def spectral_ratio(model: DensityModel, spec: Spectral, z):
    """R(z) = E[xi 1{1 - F(xi) < z}] / int_0^z phi.

    For ``z <= LHOPITAL_Z`` the tail mass is too small to difference reliably,
    and the l'Hopital form F^{-1}(1 - z) / phi(z) is used instead.
    """
    z = float(z)
    if z <= 0:
        return existence_limit(model, spec)
    if z <= LHOPITAL_Z:
        return model.quantile(1.0 - z) / spec.phi(z)
    return model.top_price(z) / spec.phi_integral(z)


def _envelope(model, spec, alpha):
    zs = np.linspace(0.0, alpha, ENVELOPE_GRID)
    zs[0] = min(LHOPITAL_Z, alpha)
    r = np.array([spectral_ratio(model, spec, z) for z in zs])
    # ties broken toward larger z
    i = len(r) - 1 - int(np.argmax(r[::-1]))
    best_z, best_r = zs[i], r[i]
    lo, hi = zs[max(i - 1, 0)], zs[min(i + 1, len(zs) - 1)]
    if hi > lo:
        res = optimize.minimize_scalar(lambda z: -spectral_ratio(model, spec, z),
                                       bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-12 * max(alpha, 1e-300)})
        if -res.fun > best_r:
            best_z, best_r = float(res.x), float(-res.fun)
    return best_z, best_r


def solve_spectral(model: DensityModel, spec: Spectral, rho0: float, c: float,
                   envelope: bool = True) -> ShortfallSolution:
    """Lower-set shortfall for a spectral risk measure at threshold ``c``.

    The claim is the constant loss rho0 / int_0^alpha phi on {xi > c}; its
    price is ``delta_hat``.  ``delta`` is the envelope -rho0 max_{z<=alpha} R(z),
    which is ``-inf`` (status MINUS_INFINITY) when the existence limit diverges.
    ``envelope=False`` skips the envelope search and reports ``delta = nan``.
    """
    alpha = _tail_mass(model, c)
    if rho0 < 0:
        raise ValueError("risk budget must be non-negative")
    limit = existence_limit(model, spec)
    if rho0 == 0:
        return ShortfallSolution("spectral", c, alpha, rho0, 0.0, 0.0, envelope_z=alpha)
    phi_a = spec.phi_integral(alpha)
    level = rho0 / phi_a
    delta_hat = -level * model.tail_price(c)
    if math.isinf(limit):
        return ShortfallSolution("spectral", c, alpha, rho0, -math.inf, delta_hat,
                                 status=ShortfallStatus.MINUS_INFINITY, level=level, envelope_z=0.0)
    if not envelope:
        return ShortfallSolution("spectral", c, alpha, rho0, math.nan, delta_hat, level=level)
    z, r = _envelope(model, spec, alpha)
    z, r = float(z), float(r)
    delta = min(-rho0 * r, delta_hat)
    return ShortfallSolution("spectral", c, alpha, rho0, delta, delta_hat, level=level, envelope_z=z)


def solve_shortfall(model: DensityModel, risk: RiskSpec, rho0: float, c: float,
                    envelope: bool = True) -> ShortfallSolution:
    if isinstance(risk, Entropic):
        return solve_entropic(model, risk.beta, rho0, c)
    if isinstance(risk, Spectral):
        return solve_spectral(model, risk, rho0, c, envelope=envelope)
    raise TypeError(f"unsupported risk measure {risk!r}")


def shortfall_risk(sol: ShortfallSolution, model: DensityModel, risk: RiskSpec) -> float:
    """rho(Y*) evaluated through the risk-measure module."""
    from .density import Discrete

    if isinstance(model, Discrete):
        return eval_risk(risk, sol.claim(model.xi), model.p)
    alpha = sol.alpha

    def q(u):
        # Y* is nonincreasing in xi, so its u-quantile sits at xi's (1-u)-quantile
        if u >= alpha:
            return 0.0
        return float(sol.claim(model.quantile(1.0 - u)))

    return eval_risk(risk, q, points=[alpha])
