"""Law-invariant convex risk measures: entropic and spectral (CVaR mixtures).

Risk is evaluated either on a sample (with optional probabilities) or on a
quantile function ``q(u) = F_X^{-1}(u)`` passed as a callable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import integrate
from scipy.special import logsumexp

from .density import DensityModel
from .errors import ConfigError, NonConvergent

__all__ = [
    "RiskSpec",
    "Entropic",
    "Spectral",
    "CVaR",
    "Penalty",
    "eval_risk",
    "penalty_at_density",
]


class RiskSpec:
    kind: str


@dataclass(frozen=True)
class Entropic(RiskSpec):
    """rho(X) = beta * log E[exp(-X / beta)]."""

    beta: float
    kind = "entropic"

    def __post_init__(self):
        if not self.beta > 0:
            raise ConfigError(f"entropic beta must be positive, got {self.beta}")


@dataclass(frozen=True)
class Spectral(RiskSpec):
    """Mixture of CVaRs: ``atoms`` is a sequence of ``(weight, level)`` pairs.

    The weight function is phi(x) = sum_i w_i / b_i 1{x < b_i}, piecewise
    constant, so its running integral is piecewise linear and exact.
    """

    atoms: tuple[tuple[float, float], ...]
    kind = "spectral"

    def __post_init__(self):
        atoms = tuple(sorted(((float(w), float(b)) for w, b in self.atoms), key=lambda a: a[1]))
        if not atoms:
            raise ConfigError("spectral measure needs at least one atom")
        for w, b in atoms:
            if not (w > 0 and 0 < b <= 1):
                raise ConfigError(f"invalid atom (weight={w}, level={b})")
        if abs(sum(w for w, _ in atoms) - 1.0) > 1e-12:
            raise ConfigError("spectral atom weights must sum to 1")
        object.__setattr__(self, "atoms", atoms)

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.atoms])

    @property
    def levels(self) -> np.ndarray:
        return np.array([b for _, b in self.atoms])

    @property
    def is_cvar(self) -> bool:
        return len(self.atoms) == 1

    def phi(self, x):
        """Weight function phi(x) on [0, 1]."""
        xa = np.asarray(x, dtype=float)
        if np.any((xa < 0) | (xa > 1)):
            raise ValueError("phi is defined on [0, 1]")
        r = ((self.weights / self.levels) * (xa[..., None] < self.levels)).sum(axis=-1)
        return float(r) if np.ndim(x) == 0 else r

    def phi_integral(self, z):
        """int_0^z phi(u) du = sum_i w_i min(z, b_i) / b_i."""
        za = np.clip(np.asarray(z, dtype=float), 0.0, 1.0)
        r = (self.weights * np.minimum(za[..., None], self.levels) / self.levels).sum(axis=-1)
        return float(r) if np.ndim(z) == 0 else r

    @property
    def phi0(self) -> float:
        """phi(0+) = sum_i w_i / b_i."""
        return float((self.weights / self.levels).sum())


def CVaR(beta: float) -> Spectral:
    """CVaR at level ``beta`` as a one-atom spectral measure."""
    return Spectral(((1.0, beta),))


def _sample_risk(spec: RiskSpec, x: np.ndarray, probs: np.ndarray | None) -> float:
    x = np.asarray(x, dtype=float).ravel()
    if probs is None:
        probs = np.full(x.size, 1.0 / x.size)
    else:
        probs = np.asarray(probs, dtype=float).ravel()
        probs = probs / probs.sum()
    if isinstance(spec, Entropic):
        return spec.beta * float(logsumexp(-x / spec.beta, b=probs))
    order = np.argsort(x, kind="stable")
    xs, ps = x[order], probs[order]
    cum = np.concatenate([[0.0], np.cumsum(ps)])
    cum[-1] = 1.0
    mass = np.diff(spec.phi_integral(cum))
    return -float(xs @ mass)


def _quantile_risk(spec: RiskSpec, q: Callable[[float], float], points: Sequence[float]) -> float:
    opts = dict(limit=500, epsabs=1e-13, epsrel=1e-11)
    try:
        if isinstance(spec, Entropic):
            pts = [p for p in points if 0 < p < 1] or None
            val, _ = integrate.quad(lambda u: math.exp(-q(u) / spec.beta), 0.0, 1.0,
                                    points=pts, **opts)
            if not (math.isfinite(val) and val > 0):
                raise NonConvergent("entropic expectation diverged")
            return spec.beta * math.log(val)
        total = 0.0
        for w, b in spec.atoms:
            pts = [p for p in points if 0 < p < b] or None
            val, _ = integrate.quad(q, 0.0, b, points=pts, **opts)
            total += w / b * val
    except (OverflowError, ZeroDivisionError) as exc:
        raise NonConvergent(str(exc)) from exc
    if not math.isfinite(total):
        raise NonConvergent("spectral integral diverged")
    return -total


def eval_risk(spec: RiskSpec, q, probs=None, points: Sequence[float] = ()) -> float:
    """Risk of X given as a sample (``probs`` optional) or a quantile function.

    The sample path uses the left-continuous empirical quantile, which makes
    the result invariant under permutations of the sample.
    """
    if callable(q):
        return _quantile_risk(spec, q, points)
    return _sample_risk(spec, q, probs)


class Penalty(NamedTuple):
    value: float
    computed: bool


def penalty_at_density(spec: RiskSpec, model: DensityModel) -> Penalty:
    """Minimal penalty of the pricing measure xi P.

    Finite values certify that the shortfall subsidy is bounded over all sets.
    No closed form is used for multi-atom spectral measures, reported as
    ``Penalty(inf, computed=False)``.
    """
    if isinstance(spec, Entropic):
        ent = model.expect(lambda x: x * np.log(x))
        return Penalty(spec.beta * ent, True)
    if spec.is_cvar:
        level = spec.levels[0]
        return Penalty(0.0 if model.sup <= 1.0 / level else math.inf, True)
    return Penalty(math.inf, False)
