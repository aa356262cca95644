"""Optimal gains claim on the lower set {xi <= c}.

With gains budget ``x_plus`` the claim is I(lambda xi) 1{xi <= c}, where the
multiplier solves E[xi I(lambda xi) 1{xi <= c}] = x_plus.  The budget map is
strictly decreasing in lambda, so we bracket on log(lambda) and use Brent.
All internals work with log(lambda): for thin sets and exponential utility
the multiplier is far below the smallest positive float.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .density import DensityModel
from .errors import NonConvergent
from .shortfall import bracket_decreasing_root
from .utility import UtilitySpec

__all__ = [
    "GainsSolution",
    "budget",
    "solve_multiplier",
    "solve_log_multiplier",
    "solve_gains",
    "value",
    "value_log",
    "value_bound",
    "value_bound_log",
]

_LOG_LAMBDA_BOUND = 1e7


@dataclass(frozen=True)
class GainsSolution:
    c: float
    x_plus: float
    log_lambda: float
    value: float

    @property
    def lambda_(self) -> float:
        return math.exp(self.log_lambda) if self.log_lambda < 710 else math.inf

    def claim(self, utility: UtilitySpec, xi):
        """Z*(xi) = I(lambda xi) on {xi <= c}, zero elsewhere."""
        xi = np.asarray(xi, dtype=float)
        if math.isinf(self.log_lambda):
            out = np.zeros_like(xi)
        else:
            out = np.where(xi <= self.c, utility.inverse_marginal_log(self.log_lambda + np.log(xi)), 0.0)
        return float(out) if out.ndim == 0 else out


def _active_top(utility: UtilitySpec, c: float, log_lam: float) -> float:
    """Upper end of the region where I(lambda xi) > 0."""
    sat = utility.saturation
    if math.isinf(sat):
        return c
    return min(c, math.exp(min(math.log(sat) - log_lam, 700.0)))


def budget(model: DensityModel, utility: UtilitySpec, c: float, log_lam: float) -> float:
    """E[xi I(lambda xi) 1{xi <= c}] at lambda = exp(log_lam)."""
    top = _active_top(utility, c, log_lam)
    return model.expect(lambda x: x * utility.inverse_marginal_log(log_lam + np.log(x)), 0.0, top)


def solve_log_multiplier(model: DensityModel, utility: UtilitySpec, c: float, x_plus: float,
                         guess: float = 0.0) -> float:
    """log(lambda) solving the budget equation; ``inf`` when ``x_plus == 0``."""
    if x_plus < 0:
        raise ValueError("gains budget must be non-negative")
    if x_plus == 0:
        return math.inf
    if not model.cdf(c) > 0:
        raise ValueError(f"P(xi <= {c}) = 0: empty gains region")

    def resid(t):
        try:
            return budget(model, utility, c, t) - x_plus
        except NonConvergent:
            # only reachable through overflow of I at tiny lambda: budget is huge there
            if t < guess:
                return math.inf
            raise

    return bracket_decreasing_root(resid, guess, -_LOG_LAMBDA_BOUND, _LOG_LAMBDA_BOUND)


def solve_multiplier(model: DensityModel, utility: UtilitySpec, c: float, x_plus: float) -> float:
    """The multiplier lambda itself (``inf`` for a zero budget)."""
    t = solve_log_multiplier(model, utility, c, x_plus)
    return math.exp(t) if t < 710 else math.inf


def value_log(model: DensityModel, utility: UtilitySpec, c: float, log_lam: float) -> float:
    """E[u(I(lambda xi)) 1{xi <= c}] at lambda = exp(log_lam)."""
    if math.isinf(log_lam) and log_lam > 0:
        return 0.0
    top = _active_top(utility, c, log_lam)
    return model.expect(lambda x: utility.u_of_inverse_log(log_lam + np.log(x)), 0.0, top)


def value(model: DensityModel, utility: UtilitySpec, c: float, lam: float) -> float:
    if math.isinf(lam):
        return 0.0
    return value_log(model, utility, c, math.log(lam))


def solve_gains(model: DensityModel, utility: UtilitySpec, c: float, x_plus: float,
                guess: float = 0.0) -> GainsSolution:
    t = solve_log_multiplier(model, utility, c, x_plus, guess=guess)
    return GainsSolution(c, x_plus, t, value_log(model, utility, c, t))


def value_bound(utility: UtilitySpec, model: DensityModel, lam: float, x_plus: float) -> float:
    """C + lambda x_plus with C = E[v(lambda xi)]; dominates the gains value for any set."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    return value_bound_log(utility, model, math.log(lam), x_plus)


def value_bound_log(utility: UtilitySpec, model: DensityModel, log_lam: float, x_plus: float) -> float:
    """:func:`value_bound` at lambda = exp(log_lam)."""
    pts = []
    if math.isfinite(utility.saturation):
        pts.append(math.exp(min(math.log(utility.saturation) - log_lam, 700.0)))
    conj = model.expect(lambda x: utility.conjugate_log(log_lam + np.log(x)), points=pts)
    return conj + math.exp(log_lam) * x_plus
