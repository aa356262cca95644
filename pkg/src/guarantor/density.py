"""Laws of the state-price density xi.

Every model exposes the same small surface: ``cdf``, ``quantile`` (the
left-continuous generalized inverse), ``expect`` over an interval of
xi-values, and the closed-form partial expectation ``tail_price``.

Regions are half-open intervals ``(lo, hi]`` so that ``(0, c]`` and
``(c, inf)`` partition the support, including for atom-bearing laws.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize, special

from .errors import ConfigError, NonConvergent

__all__ = [
    "DensityModel",
    "Lognormal",
    "TruncatedLognormal",
    "Discrete",
    "adaptive_quad",
    "DEFAULT_EXPECT_TOL",
]

DEFAULT_EXPECT_TOL = 1e-9

# Standard-normal clipping: Phi(-9) ~ 1e-19, far below the 1e-12 relative budget
# for the discarded tails. The upper clip is widened by 2s so that integrands
# growing like xi**2 are still covered.
_Z_CLIP = 9.0

_GL_LOW = np.polynomial.legendre.leggauss(10)
_GL_HIGH = np.polynomial.legendre.leggauss(20)


def adaptive_quad(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    rel_tol: float = DEFAULT_EXPECT_TOL,
    abs_tol: float = 1e-15,
    points: Sequence[float] = (),
    max_intervals: int = 4000,
) -> float:
    """Integrate a vectorized ``f`` over ``[a, b]`` by adaptive bisection.

    Each interval is integrated with 10- and 20-point Gauss-Legendre rules;
    intervals whose difference exceeds their share of the tolerance are split.
    All pending intervals are evaluated in a single call of ``f``.

    Raises
    ------
    NonConvergent
        If the subdivision budget is exhausted or ``f`` returns non-finite values.
    """
    if not b > a:
        return 0.0
    edges = np.unique(np.clip(np.array([a, *points, b], dtype=float), a, b))
    lo, hi = edges[:-1], edges[1:]
    keep = hi > lo
    lo, hi = lo[keep], hi[keep]
    width_total = b - a
    accepted = 0.0
    n_intervals = lo.size
    x_lo, w_lo = _GL_LOW
    x_hi, w_hi = _GL_HIGH
    while lo.size:
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        nodes = np.concatenate(
            [mid[:, None] + half[:, None] * x_lo, mid[:, None] + half[:, None] * x_hi], axis=1
        )
        vals = np.asarray(f(nodes), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise NonConvergent("integrand returned non-finite values")
        g_lo = half * (vals[:, :10] @ w_lo)
        g_hi = half * (vals[:, 10:] @ w_hi)
        err = np.abs(g_hi - g_lo)
        estimate = accepted + g_hi.sum()
        target = max(rel_tol * abs(estimate), abs_tol)
        ok = err <= target * (hi - lo) / width_total
        accepted += g_hi[ok].sum()
        lo, hi = lo[~ok], hi[~ok]
        if lo.size:
            n_intervals += lo.size
            if n_intervals > max_intervals:
                raise NonConvergent(
                    f"adaptive quadrature exceeded {max_intervals} subintervals on [{a}, {b}]"
                )
            mid = 0.5 * (lo + hi)
            lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
    return float(accepted)


def _norm_cdf(z):
    return special.ndtr(z)


def _normal_between(rng: np.random.Generator, n: int, za: float, zb: float) -> np.ndarray:
    """Standard normal draws conditioned on (za, zb], by inverse transform.

    Upper-tail intervals are sampled through the survival function so that
    thin strata keep full relative precision.
    """
    u = rng.random(n)
    if za > 0:
        lo, hi = _norm_cdf(-zb), _norm_cdf(-za)
        return -special.ndtri(hi - u * (hi - lo))
    lo, hi = _norm_cdf(za), _norm_cdf(zb)
    return special.ndtri(lo + u * (hi - lo))


def _norm_pdf(z):
    return np.exp(-0.5 * np.square(z)) / math.sqrt(2.0 * math.pi)


class DensityModel:
    """Common interface of the state-price density laws."""

    atomless: bool = True
    expect_tol: float = DEFAULT_EXPECT_TOL

    @property
    def sup(self) -> float:
        """Essential supremum of xi (possibly ``inf``)."""
        raise NotImplementedError

    @property
    def inf(self) -> float:
        """Essential infimum of xi."""
        raise NotImplementedError

    @property
    def mean(self) -> float:
        return self.expect(lambda x: x)

    def cdf(self, x: float) -> float:
        raise NotImplementedError

    def sf(self, x: float) -> float:
        """P(xi > x)."""
        return 1.0 - self.cdf(x)

    def quantile(self, u: float) -> float:
        raise NotImplementedError

    def expect(
        self,
        g: Callable[[np.ndarray], np.ndarray],
        lo: float = 0.0,
        hi: float = math.inf,
        points: Sequence[float] = (),
    ) -> float:
        """E[g(xi) 1{lo < xi <= hi}]; ``g`` must accept numpy arrays."""
        raise NotImplementedError

    def partial_mean(self, lo: float, hi: float) -> float:
        """E[xi 1{lo < xi <= hi}]."""
        return self.expect(lambda x: x, lo, hi)

    def tail_price(self, c: float) -> float:
        """E[xi 1{xi > c}]."""
        return self.partial_mean(max(c, 0.0), math.inf)

    def top_price(self, z: float) -> float:
        """E[xi 1{1 - F(xi) < z}], the price of the upper tail of mass ``z``."""
        return self.tail_price(self.quantile(1.0 - z))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def sample_between(self, rng: np.random.Generator, n: int, lo: float, hi: float) -> np.ndarray:
        """Draws from the law of xi conditional on lo < xi <= hi."""
        raise NotImplementedError

    def _check_u(self, u: float) -> None:
        if not 0.0 <= u <= 1.0 or math.isnan(u):
            raise ValueError(f"quantile level must lie in [0, 1], got {u}")


@dataclass(frozen=True)
class Lognormal(DensityModel):
    """xi = exp(m + s Z) with Z standard normal.

    ``m`` defaults to ``-s**2 / 2`` which makes E[xi] = 1; an explicit ``m``
    inconsistent with that normalization is rejected.
    """

    s: float
    m: float | None = None
    expect_tol: float = DEFAULT_EXPECT_TOL

    def __post_init__(self):
        if not self.s > 0:
            raise ConfigError(f"log-std must be positive, got {self.s}")
        if self.m is None:
            object.__setattr__(self, "m", -0.5 * self.s**2)
        elif abs(self.m + 0.5 * self.s**2) > 1e-12:
            raise ConfigError("lognormal state-price density needs m = -s^2/2 so that E[xi] = 1")

    @classmethod
    def from_black_scholes(cls, b: float, sigma: float, T: float, **kw) -> "Lognormal":
        """Density of the Black-Scholes market with drift ``b`` and zero rate."""
        if sigma <= 0 or T <= 0:
            raise ConfigError("sigma and T must be positive")
        mu = b / sigma
        return cls(s=abs(mu) * math.sqrt(T), **kw)

    @property
    def sup(self) -> float:
        return math.inf

    @property
    def inf(self) -> float:
        return 0.0

    @property
    def mean(self) -> float:
        return math.exp(self.m + 0.5 * self.s**2)

    def _z(self, x: float) -> float:
        if x <= 0:
            return -math.inf
        if math.isinf(x):
            return math.inf
        return (math.log(x) - self.m) / self.s

    def cdf(self, x: float) -> float:
        return float(_norm_cdf(self._z(x)))

    def sf(self, x: float) -> float:
        return float(_norm_cdf(-self._z(x)))

    def quantile(self, u: float) -> float:
        self._check_u(u)
        if u == 0.0:
            return 0.0
        if u == 1.0:
            return math.inf
        return math.exp(self.m + self.s * float(special.ndtri(u)))

    def _z_integral(self, g, za, zb, points):
        za = max(za, -_Z_CLIP)
        zb = min(zb, _Z_CLIP + 2.0 * self.s)
        if not zb > za:
            return 0.0
        zpts = [self._z(p) for p in points if p > 0 and math.isfinite(p)]

        def integrand(z):
            return g(np.exp(self.m + self.s * z)) * _norm_pdf(z)

        return adaptive_quad(integrand, za, zb, rel_tol=self.expect_tol, points=zpts)

    def expect(self, g, lo=0.0, hi=math.inf, points=()):
        return self._z_integral(g, self._z(lo), self._z(hi), points)

    def partial_mean(self, lo: float, hi: float) -> float:
        """E[xi 1{lo < xi <= hi}] in closed form."""
        za, zb = self._z(lo), self._z(hi)
        if not zb > za:
            return 0.0
        return self.mean * float(_norm_cdf(zb - self.s) - _norm_cdf(za - self.s))

    def tail_price(self, c: float) -> float:
        return self.mean * float(_norm_cdf(self.s - self._z(max(c, 0.0))))

    def sample(self, rng, n):
        return np.exp(self.m + self.s * rng.standard_normal(n))

    def sample_between(self, rng, n, lo, hi):
        return np.exp(self.m + self.s * _normal_between(rng, n, self._z(lo), self._z(hi)))


@dataclass(frozen=True)
class TruncatedLognormal(DensityModel):
    """Lognormal(m, s) conditioned on xi <= ``upper``.

    Mass is renormalized; the mean is *not* re-centred to 1 unless
    ``recenter=True``, in which case ``m`` is shifted (keeping ``upper`` fixed)
    until E[xi] = 1. The resulting mean is available as ``mean``.
    """

    s: float
    upper: float
    m: float | None = None
    recenter: bool = False
    expect_tol: float = DEFAULT_EXPECT_TOL
    _mass: float = field(init=False, repr=False, compare=False, default=1.0)

    def __post_init__(self):
        if not self.s > 0:
            raise ConfigError(f"log-std must be positive, got {self.s}")
        if not (self.upper > 0 and math.isfinite(self.upper)):
            raise ConfigError(f"truncation bound must be positive and finite, got {self.upper}")
        if self.m is None:
            object.__setattr__(self, "m", -0.5 * self.s**2)
        if self.recenter:
            object.__setattr__(self, "m", self._centred_m())
        object.__setattr__(self, "_mass", float(_norm_cdf(self._z0(self.upper))))
        if self._mass <= 0:
            raise ConfigError("truncation bound leaves no probability mass")

    @classmethod
    def from_black_scholes(cls, b, sigma, T, upper, **kw) -> "TruncatedLognormal":
        mu = b / sigma
        return cls(s=abs(mu) * math.sqrt(T), upper=upper, **kw)

    def _centred_m(self) -> float:
        s, top = self.s, math.log(self.upper)

        def excess_log_mean(m):
            zb = (top - m) / s
            return m + 0.5 * s * s + math.log(_norm_cdf(zb - s)) - math.log(_norm_cdf(zb))

        if excess_log_mean(top) < 0:
            raise ConfigError("cannot re-centre: truncation bound is below 1")
        return optimize.brentq(excess_log_mean, -50.0 - s * s, top, xtol=1e-15)

    def _z0(self, x):
        if x <= 0:
            return -math.inf
        if math.isinf(x):
            return math.inf
        return (math.log(x) - self.m) / self.s

    @property
    def sup(self) -> float:
        return self.upper

    @property
    def inf(self) -> float:
        return 0.0

    @property
    def mean(self) -> float:
        return self.partial_mean(0.0, self.upper)

    def cdf(self, x):
        if x >= self.upper:
            return 1.0
        return float(_norm_cdf(self._z0(x))) / self._mass

    def quantile(self, u):
        self._check_u(u)
        if u == 0.0:
            return 0.0
        if u == 1.0:
            return self.upper
        return min(math.exp(self.m + self.s * float(special.ndtri(u * self._mass))), self.upper)

    def expect(self, g, lo=0.0, hi=math.inf, points=()):
        hi = min(hi, self.upper)
        za, zb = self._z0(lo), self._z0(hi)
        za = max(za, -_Z_CLIP)
        if not zb > za:
            return 0.0
        zpts = [self._z0(p) for p in points if p > 0 and math.isfinite(p)]

        def integrand(z):
            return g(np.exp(self.m + self.s * z)) * _norm_pdf(z)

        return adaptive_quad(integrand, za, zb, rel_tol=self.expect_tol, points=zpts) / self._mass

    def partial_mean(self, lo, hi):
        hi = min(hi, self.upper)
        za, zb = self._z0(lo), self._z0(hi)
        if not zb > za:
            return 0.0
        scale = math.exp(self.m + 0.5 * self.s**2) / self._mass
        return scale * float(_norm_cdf(zb - self.s) - _norm_cdf(za - self.s))

    def tail_price(self, c):
        return self.partial_mean(max(c, 0.0), self.upper)

    def top_price(self, z):
        # Thin tails are parameterised by their width d below the truncation
        # point in z-space; going through xi itself would lose all precision.
        target = z * self._mass
        zb = self._z0(self.upper)
        if target > 1e-4:
            return self.tail_price(self.quantile(1.0 - z))
        tau = 0.5 * (_GL_HIGH[0] + 1.0)
        w = 0.5 * _GL_HIGH[1]

        def mass(d):
            return d * float(w @ _norm_pdf(zb - d * tau)) - target

        d0 = target / float(_norm_pdf(zb))
        d = optimize.brentq(mass, 0.25 * d0, 4.0 * d0, xtol=1e-300, rtol=4 * np.finfo(float).eps)
        nodes = zb - d * tau
        return d * float(w @ (np.exp(self.m + self.s * nodes) * _norm_pdf(nodes))) / self._mass

    def sample(self, rng, n):
        u = rng.random(n) * self._mass
        return np.minimum(np.exp(self.m + self.s * special.ndtri(u)), self.upper)

    def sample_between(self, rng, n, lo, hi):
        z = _normal_between(rng, n, self._z0(lo), self._z0(min(hi, self.upper)))
        return np.minimum(np.exp(self.m + self.s * z), self.upper)


@dataclass(frozen=True, init=False)
class Discrete(DensityModel):
    """Finitely many states ``xi_i > 0`` with probabilities ``p_i``.

    States are stored sorted ascending. E[xi] = 1 is checked against
    ``mean_tol`` unless ``normalized=False``.
    """

    xi: np.ndarray
    p: np.ndarray
    expect_tol: float = DEFAULT_EXPECT_TOL
    atomless = False

    def __init__(self, xi, p, normalized: bool = True, mean_tol: float = 1e-9,
                 expect_tol: float = DEFAULT_EXPECT_TOL):
        xi = np.asarray(xi, dtype=float).ravel()
        p = np.asarray(p, dtype=float).ravel()
        if xi.shape != p.shape or xi.size == 0:
            raise ConfigError("states and probabilities must be non-empty and of equal length")
        if np.any(xi <= 0) or np.any(p <= 0):
            raise ConfigError("states and probabilities must be positive")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ConfigError(f"probabilities sum to {p.sum()}, not 1")
        order = np.argsort(xi, kind="stable")
        xi, p = xi[order], p[order]
        if normalized and abs(float(xi @ p) - 1.0) > mean_tol:
            raise ConfigError(f"E[xi] = {xi @ p} differs from 1")
        xi.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "expect_tol", expect_tol)

    @classmethod
    def from_pairs(cls, pairs, **kw) -> "Discrete":
        xi, p = zip(*pairs)
        return cls(xi, p, **kw)

    def __hash__(self):
        return hash((self.xi.tobytes(), self.p.tobytes()))

    def __eq__(self, other):
        return (isinstance(other, Discrete) and np.array_equal(self.xi, other.xi)
                and np.array_equal(self.p, other.p))

    @property
    def n(self) -> int:
        return self.xi.size

    @property
    def sup(self):
        return float(self.xi[-1])

    @property
    def inf(self):
        return float(self.xi[0])

    @property
    def mean(self):
        return float(self.xi @ self.p)

    def cdf(self, x):
        return float(min(1.0, self.p[self.xi <= x].sum()))

    def sf(self, x):
        return float(self.p[self.xi > x].sum())

    def quantile(self, u):
        self._check_u(u)
        cum = np.cumsum(self.p)
        cum[-1] = 1.0
        k = int(np.searchsorted(cum, u, side="left"))
        return float(self.xi[min(k, self.n - 1)])

    def expect(self, g, lo=0.0, hi=math.inf, points=()):
        mask = (self.xi > lo) & (self.xi <= hi)
        if not mask.any():
            return 0.0
        return float(np.asarray(g(self.xi[mask]), dtype=float) @ self.p[mask])

    def partial_mean(self, lo, hi):
        mask = (self.xi > lo) & (self.xi <= hi)
        return float(self.xi[mask] @ self.p[mask])

    def tail_price(self, c):
        return self.partial_mean(c, math.inf)

    def sample(self, rng, n):
        return rng.choice(self.xi, size=n, p=self.p)

    def sample_between(self, rng, n, lo, hi):
        mask = (self.xi > lo) & (self.xi <= hi)
        if not mask.any():
            raise ValueError(f"no atoms in ({lo}, {hi}]")
        return rng.choice(self.xi[mask], size=n, p=self.p[mask] / self.p[mask].sum())
