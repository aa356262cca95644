"""Concave utilities of gains above the guarantee.

Each utility has u(0) = 0 and provides the marginal u', its inverse I
(clipped to 0 at or above u'(0+)) and the convex conjugate
v(y) = sup_{x >= 0} (u(x) - x y).  The ``*_log`` variants take log(y) so the
solver can work with multipliers far below the float range.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

__all__ = ["UtilitySpec", "Exponential", "Power", "LogShifted"]


def _positive(y):
    y = np.asarray(y, dtype=float)
    if np.any(~(y > 0)):
        raise ValueError("argument must be strictly positive")
    return y


def _out(a):
    return float(a) if np.ndim(a) == 0 else a


class UtilitySpec:
    """Interface shared by the utility families."""

    #: u'(0+); ``inf`` when the marginal utility is unbounded at zero.
    saturation: float = math.inf

    def u(self, x):
        raise NotImplementedError

    def marginal(self, x):
        raise NotImplementedError

    def inverse_marginal_log(self, log_y):
        """I(exp(log_y)), vectorized and free of argument checks."""
        raise NotImplementedError

    def conjugate_log(self, log_y):
        raise NotImplementedError

    def inverse_marginal(self, y):
        return _out(self.inverse_marginal_log(np.log(_positive(y))))

    def conjugate(self, y):
        return _out(self.conjugate_log(np.log(_positive(y))))

    def u_of_inverse_log(self, log_y):
        """u(I(exp(log_y)))."""
        return self.u(self.inverse_marginal_log(log_y))


@dataclass(frozen=True)
class Exponential(UtilitySpec):
    """u(x) = 1 - exp(-delta x)."""

    delta: float

    def __post_init__(self):
        if not self.delta > 0:
            raise ConfigError(f"delta must be positive, got {self.delta}")

    @property
    def saturation(self):
        return self.delta

    def u(self, x):
        return _out(-np.expm1(-self.delta * np.asarray(x, dtype=float)))

    def marginal(self, x):
        return _out(self.delta * np.exp(-self.delta * np.asarray(x, dtype=float)))

    def inverse_marginal_log(self, log_y):
        log_y = np.asarray(log_y, dtype=float)
        return np.maximum(math.log(self.delta) - log_y, 0.0) / self.delta

    def u_of_inverse_log(self, log_y):
        # 1 - y/delta below saturation, 0 above
        r = np.exp(np.minimum(np.asarray(log_y, dtype=float) - math.log(self.delta), 0.0))
        return 1.0 - r

    def conjugate_log(self, log_y):
        t = np.minimum(np.asarray(log_y, dtype=float) - math.log(self.delta), 0.0)
        r = np.exp(t)
        return 1.0 - r + r * t


@dataclass(frozen=True)
class Power(UtilitySpec):
    """u(x) = x**gamma with 0 < gamma < 1."""

    gamma: float

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ConfigError(f"gamma must lie in (0, 1), got {self.gamma}")

    def u(self, x):
        return _out(np.power(np.asarray(x, dtype=float), self.gamma))

    def marginal(self, x):
        return _out(self.gamma * np.power(np.asarray(x, dtype=float), self.gamma - 1.0))

    def inverse_marginal_log(self, log_y):
        g = self.gamma
        return np.exp((np.asarray(log_y, dtype=float) - math.log(g)) / (g - 1.0))

    def conjugate_log(self, log_y):
        g = self.gamma
        return (1.0 - g) * np.exp(g * (np.asarray(log_y, dtype=float) - math.log(g)) / (g - 1.0))


@dataclass(frozen=True)
class LogShifted(UtilitySpec):
    """u(x) = log(1 + x / a)."""

    a: float

    def __post_init__(self):
        if not self.a > 0:
            raise ConfigError(f"a must be positive, got {self.a}")

    @property
    def saturation(self):
        return 1.0 / self.a

    def u(self, x):
        return _out(np.log1p(np.asarray(x, dtype=float) / self.a))

    def marginal(self, x):
        return _out(1.0 / (self.a + np.asarray(x, dtype=float)))

    def inverse_marginal_log(self, log_y):
        return np.maximum(np.exp(-np.asarray(log_y, dtype=float)) - self.a, 0.0)

    def conjugate_log(self, log_y):
        t = np.minimum(np.asarray(log_y, dtype=float) + math.log(self.a), 0.0)
        return np.expm1(t) - t
