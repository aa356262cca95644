"""Brute-force checks on finite markets and Monte Carlo verification of plans.

On a discrete market with N <= 16 states every gains region A can be
enumerated.  For each subset the shortfall subsidy and the gains problem are
solved exactly, vectorised across all 2^N bitmasks (bit ``i`` is the i-th
smallest state).  A separate direct search over claim vectors, which does not
use the decoupling, serves as an independent check of the enumeration.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .density import DensityModel, Discrete
from .errors import BudgetExceeded, ConfigError, SeedMissing
from .riskmeasure import Entropic, RiskSpec, Spectral, eval_risk
from .utility import UtilitySpec

__all__ = [
    "MAX_STATES",
    "OracleInstance",
    "OracleResult",
    "SearchResult",
    "RearrangementCertificate",
    "Estimate",
    "VerificationReport",
    "enumerate_solve",
    "direct_search",
    "pattern_value",
    "rearrangement_check",
    "verify_solution",
    "discretize",
    "masks_of",
    "reconstruct_claim",
    "claim_metrics",
]

MAX_STATES = 16
TAIL_BATCHES = 20
_BISECT_ITERS = 200


@dataclass(frozen=True)
class OracleInstance:
    density: Discrete
    utility: UtilitySpec
    risk: RiskSpec
    x0: float
    rho0: float

    def __post_init__(self):
        if not isinstance(self.density, Discrete):
            raise ConfigError("oracle instances need a discrete density")
        if self.density.n > MAX_STATES:
            raise BudgetExceeded(f"{self.density.n} states exceed the enumeration budget of {MAX_STATES}")
        if np.any(np.diff(self.density.xi) <= 0):
            raise ConfigError("state-price values must be distinct")
        if self.rho0 < 0:
            raise ConfigError("risk budget rho0 must be non-negative")
        if self.x0 < 0:
            raise ConfigError("budget x0 must be non-negative")

    @property
    def n(self) -> int:
        return self.density.n


@dataclass(frozen=True)
class OracleResult:
    """Enumeration over all gains regions.

    Table arrays are indexed by bitmask; ``value[m]`` is U(A, x+(A)) for the
    set ``A`` encoded by ``m``.
    """

    best_value: float
    best_mask: int
    delta: np.ndarray = field(repr=False)
    x_plus: np.ndarray = field(repr=False)
    log_lambda: np.ndarray = field(repr=False)
    value: np.ndarray = field(repr=False)
    tail_set: np.ndarray = field(repr=False)
    eta: np.ndarray = field(repr=False)
    best_lower_value: float = math.nan
    best_lower_size: int = 0

    @property
    def lower_set_gap(self) -> float:
        return self.best_value - self.best_lower_value

    def best_subset(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.value.size.bit_length() - 1) if self.best_mask >> i & 1)


def masks_of(n: int) -> np.ndarray:
    """Boolean membership matrix of shape (2**n, n)."""
    m = np.arange(2**n, dtype=np.int64)
    return ((m[:, None] >> np.arange(n)) & 1).astype(bool)


def _entropic_tail(xi, p, member, beta, rho0):
    """Subsidy and eta for every complement set (rows of ``member``)."""
    rows = member.shape[0]
    if rho0 == 0:
        return np.zeros(rows), np.full(rows, math.inf)
    pc = member @ p
    target = math.expm1(rho0 / beta) + pc
    price = member @ (p * xi)
    top = np.where(member, xi, 0.0).max(axis=1)
    nonempty = pc > 0
    safe_price = np.where(nonempty, price, 1.0)
    lo = np.log(beta * safe_price / target)
    hi = np.log(beta * np.where(nonempty, top, 1.0))

    def lhs(s):
        ratio = beta * xi[None, :] * np.exp(-s)[:, None]
        return np.where(member, np.maximum(ratio, 1.0), 0.0) @ p

    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        up = lhs(mid) > target
        lo = np.where(up, mid, lo)
        hi = np.where(up, hi, mid)
        if np.all(hi - lo <= 4e-16 * np.maximum(1.0, np.abs(hi))):
            break
    # polish on the active set {beta xi > eta}, where the equation is linear in 1/eta
    eta = np.exp(0.5 * (lo + hi))
    active = member & (beta * xi[None, :] > eta[:, None])
    rest = np.where(member & ~active, 1.0, 0.0) @ p
    act_price = np.where(active, 1.0, 0.0) @ (p * xi)
    eta = np.where(act_price > 0, beta * act_price / np.maximum(target - rest, 1e-300), eta)
    logs = np.log(beta * xi[None, :] / eta[:, None])
    delta = -beta * (np.where(member, np.maximum(logs, 0.0), 0.0) @ (p * xi))
    delta = np.where(nonempty, delta, 0.0)
    eta = np.where(nonempty, eta, math.inf)
    return delta, eta


def _spectral_tail(xi, p, spec: Spectral, rho0, n):
    """Subsidy for every complement and the maximising loss set inside it.

    For a loss L >= 0 the spectral risk is a Choquet integral with a concave
    distortion, so the cheapest way to spend the risk budget is a flat loss on
    a single set S.  The best S inside each complement is found with a
    subset-maximum sweep over bitmasks.
    """
    member = masks_of(n)
    prob = member @ p
    price = member @ (p * xi)
    with np.errstate(divide="ignore", invalid="ignore"):
        score = np.where(prob > 0, price / spec.phi_integral(prob), -np.inf)
    arg = np.arange(2**n, dtype=np.int64)
    best, best_arg = score.copy(), arg.copy()
    for i in range(n):
        with_bit = arg[(arg >> i) & 1 == 1]
        without = with_bit ^ (1 << i)
        take = best[without] > best[with_bit]
        best[with_bit] = np.where(take, best[without], best[with_bit])
        best_arg[with_bit] = np.where(take, best_arg[without], best_arg[with_bit])
    delta = np.where(np.isfinite(best), -rho0 * best, 0.0)
    return delta, np.where(np.isfinite(best), best_arg, 0)


def _gains_table(xi, p, member, utility: UtilitySpec, x_plus):
    """log(lambda) and value of the gains problem for every row of ``member``."""
    rows = member.shape[0]
    has = member.any(axis=1) & (x_plus > 0)
    logxi = np.log(xi)

    def spend(t):
        z = utility.inverse_marginal_log(t[:, None] + logxi[None, :])
        with np.errstate(invalid="ignore"):
            return np.where(member, z, 0.0) @ (p * xi)

    lo = np.full(rows, -1.0)
    hi = np.full(rows, 1.0)
    for _ in range(80):
        need = has & ~(spend(lo) >= x_plus)
        if not need.any():
            break
        lo = np.where(need, 2 * lo, lo)
    for _ in range(80):
        need = has & (spend(hi) > x_plus)
        if not need.any():
            break
        hi = np.where(need, 2 * hi, hi)
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        up = spend(mid) > x_plus
        lo = np.where(up, mid, lo)
        hi = np.where(up, hi, mid)
        if np.all(hi - lo <= 4e-16 * np.maximum(1.0, np.abs(hi))):
            break
    t = np.where(has, 0.5 * (lo + hi), math.inf)
    u = utility.u_of_inverse_log(np.where(has, t, 0.0)[:, None] + logxi[None, :])
    value = np.where(has, np.where(member, u, 0.0) @ p, 0.0)
    return t, value


def enumerate_solve(inst: OracleInstance) -> OracleResult:
    """Best value over all gains regions A, with the per-subset table."""
    xi, p, n = inst.density.xi, inst.density.p, inst.n
    member = masks_of(n)
    full = 2**n - 1
    comp = full ^ np.arange(2**n, dtype=np.int64)
    if isinstance(inst.risk, Entropic):
        d_comp, eta_comp = _entropic_tail(xi, p, member, inst.risk.beta, inst.rho0)
        delta, eta = d_comp[comp], eta_comp[comp]
        tail_set = np.where(delta < 0, comp, 0)
    elif isinstance(inst.risk, Spectral):
        d_comp, arg_comp = _spectral_tail(xi, p, inst.risk, inst.rho0, n)
        delta, tail_set = d_comp[comp], arg_comp[comp]
        eta = np.full(2**n, math.nan)
    else:
        raise TypeError(f"unsupported risk measure {inst.risk!r}")
    x_plus = inst.x0 - delta
    log_lam, value = _gains_table(xi, p, member, inst.utility, x_plus)
    best = int(np.argmax(value))
    lower = (1 << np.arange(n + 1, dtype=np.int64)) - 1
    k = int(np.argmax(value[lower]))
    return OracleResult(
        best_value=float(value[best]), best_mask=best, delta=delta, x_plus=x_plus,
        log_lambda=log_lam, value=value, tail_set=tail_set, eta=eta,
        best_lower_value=float(value[lower[k]]), best_lower_size=k,
    )


def reconstruct_claim(inst: OracleInstance, res: OracleResult, mask: int | None = None) -> np.ndarray:
    """Claim vector I(lambda xi) on A plus the optimal shortfall on the complement."""
    m = res.best_mask if mask is None else mask
    xi, p, n = inst.density.xi, inst.density.p, inst.n
    inside = ((m >> np.arange(n)) & 1).astype(bool)
    x = np.zeros(n)
    t = res.log_lambda[m]
    if math.isfinite(t):
        x[inside] = inst.utility.inverse_marginal_log(t + np.log(xi[inside]))
    if res.delta[m] < 0:
        if isinstance(inst.risk, Entropic):
            beta = inst.risk.beta
            x[~inside] = -beta * np.maximum(np.log(beta * xi[~inside] / res.eta[m]), 0.0)
        else:
            s = ((int(res.tail_set[m]) >> np.arange(n)) & 1).astype(bool)
            x[s] = -inst.rho0 / inst.risk.phi_integral(float(p[s].sum()))
    return x


def claim_metrics(inst: OracleInstance, x) -> tuple[float, float, float]:
    """(value, price, shortfall risk) of a claim vector."""
    x = np.asarray(x, dtype=float)
    p, xi = inst.density.p, inst.density.xi
    value = float(p @ inst.utility.u(np.maximum(x, 0.0)))
    price = float(p @ (xi * x))
    risk = eval_risk(inst.risk, np.minimum(x, 0.0), p)
    return value, price, risk


# --- direct search over claim vectors ---------------------------------------


def pattern_value(inst: OracleInstance, mask: int) -> tuple[float, np.ndarray]:
    """Best claim whose gains sit on ``mask`` and losses on its complement.

    Solves the joint problem in (Z, L) >= 0 with one shared budget and the
    risk constraint on L by SLSQP; no decoupling is used.
    """
    xi, p, n = inst.density.xi, inst.density.p, inst.n
    inside = ((mask >> np.arange(n)) & 1).astype(bool)
    gi, li = np.flatnonzero(inside), np.flatnonzero(~inside)
    na, nc = gi.size, li.size
    if na == 0 or inst.x0 == 0 and inst.rho0 == 0:
        return 0.0, np.zeros(n)
    u = inst.utility
    pa, xa, pc, xc = p[gi], xi[gi], p[li], xi[li]
    risk = inst.risk
    if isinstance(risk, Spectral) and nc > 0:
        w, b = risk.weights, risk.levels
        k = w.size
    else:
        k = 0
    # variables: z (na), l (nc), then for spectral: t (k), slack on C (k*nc), slack on A (k)
    nv = na + nc + k + k * nc + k
    iz, il = slice(0, na), slice(na, na + nc)
    it = slice(na + nc, na + nc + k)
    isc = slice(na + nc + k, na + nc + k + k * nc)
    isa = slice(na + nc + k + k * nc, nv)
    prob_a = float(pa.sum())

    def obj(v):
        return -float(pa @ u.u(v[iz]))

    def obj_grad(v):
        g = np.zeros(nv)
        g[iz] = -pa * u.marginal(v[iz])
        return g

    cons = []
    budget_row = np.zeros(nv)
    budget_row[iz], budget_row[il] = -pa * xa, pc * xc
    cons.append(dict(type="ineq", fun=lambda v: inst.x0 + budget_row @ v, jac=lambda v: budget_row))
    bounds = [(0.0, None)] * (na + nc)
    if nc > 0 and isinstance(risk, Entropic):
        beta = risk.beta
        cap = math.exp(inst.rho0 / beta)

        def ent(v):
            return cap - prob_a - float(pc @ np.exp(np.minimum(v[il] / beta, 700.0)))

        def ent_jac(v):
            g = np.zeros(nv)
            g[il] = -pc * np.exp(np.minimum(v[il] / beta, 700.0)) / beta
            return g

        cons.append(dict(type="ineq", fun=ent, jac=ent_jac))
    elif k > 0:
        bounds += [(None, None)] * k + [(0.0, None)] * (k * nc + k)
        # sum_k w_k (t_k + (1/b_k) E[(L - t_k)^+]) <= rho0, with slacks for the positive parts
        row = np.zeros(nv)
        row[it] = -w
        row[isc] = -(np.outer(w / b, pc)).ravel()
        row[isa] = -(w / b) * prob_a
        cons.append(dict(type="ineq", fun=lambda v: inst.rho0 + row @ v, jac=lambda v: row))
        # slack_{k,j} >= l_j - t_k on C and slack_{k,A} >= -t_k on A
        mc = np.zeros((k * nc + k, nv))
        for a in range(k):
            for j in range(nc):
                r = a * nc + j
                mc[r, na + nc + k + r] = 1.0
                mc[r, na + j] = -1.0
                mc[r, na + nc + a] = 1.0
            r = k * nc + a
            mc[r, na + nc + k + k * nc + a] = 1.0
            mc[r, na + nc + a] = 1.0
        cons.append(dict(type="ineq", fun=lambda v: mc @ v, jac=lambda v: mc))
    v0 = np.zeros(nv)
    v0[iz] = inst.x0 / float(pa @ xa)
    res = optimize.minimize(obj, v0, jac=obj_grad, bounds=bounds, constraints=cons,
                            method="SLSQP", options=dict(ftol=1e-13, maxiter=1000))
    v = res.x
    x = np.zeros(n)
    x[gi] = np.maximum(v[iz], 0.0)
    x[li] = -np.maximum(v[il], 0.0)
    return -float(res.fun), x


@dataclass(frozen=True)
class SearchResult:
    value: float
    mask: int
    claim: np.ndarray = field(repr=False)
    patterns_solved: int = 0


def direct_search(inst: OracleInstance, starts: int = 32, seed: int = 0) -> SearchResult:
    """Multi-start local search over gain/loss sign patterns.

    Each start draws a random pattern and repeatedly flips the single state
    whose move improves the joint (Z, L) optimum most.  Pattern solutions are
    cached across starts.
    """
    n = inst.n
    rng = np.random.default_rng(seed)
    cache: dict[int, tuple[float, np.ndarray]] = {}

    def solve(m):
        if m not in cache:
            cache[m] = pattern_value(inst, m)
        return cache[m][0]

    best_m, best_v = 0, solve(0)
    for _ in range(starts):
        m = int(rng.integers(0, 2**n))
        v = solve(m)
        while True:
            vals = [(solve(m ^ (1 << i)), m ^ (1 << i)) for i in range(n)]
            nv, nm = max(vals)
            if nv <= v + 1e-12:
                break
            v, m = nv, nm
        if v > best_v:
            best_v, best_m = v, m
    return SearchResult(best_v, best_m, cache[best_m][1], len(cache))


# --- comonotone rearrangement ------------------------------------------------


@dataclass(frozen=True)
class RearrangementCertificate:
    comonotone: float
    maximum: float
    minimum: float
    permutations: int
    holds: bool


def rearrangement_check(a, b, tol: float = 1e-12) -> RearrangementCertificate:
    """Check that sorted pairing maximises the mean of a*b over all couplings."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size != b.size:
        raise ValueError("samples must have equal length")
    if a.size > 8:
        raise BudgetExceeded("exhaustive rearrangement is limited to n <= 8")
    perms = np.array(list(itertools.permutations(range(b.size))))
    means = (b[perms] * a).mean(axis=1)
    como = float(a @ b / a.size)
    hi, lo = float(means.max()), float(means.min())
    scale = max(1.0, abs(como))
    return RearrangementCertificate(como, hi, lo, len(perms), hi <= como + tol * scale)


# --- discretisation ----------------------------------------------------------


def discretize(model: DensityModel, n: int) -> Discrete:
    """``n`` equal-probability atoms at the conditional means of quantile bins."""
    edges = [model.quantile(k / n) if 0 < k < n else (0.0 if k == 0 else math.inf) for k in range(n + 1)]
    xi = np.array([n * model.partial_mean(edges[k], edges[k + 1]) for k in range(n)])
    xi /= xi.mean()  # removes quadrature drift in E[xi]
    return Discrete(xi, np.full(n, 1.0 / n))


# --- Monte Carlo verification ------------------------------------------------


@dataclass(frozen=True)
class Estimate:
    estimate: float
    se: float
    target: float
    passed: bool


@dataclass(frozen=True)
class VerificationReport:
    paths: int
    seed: int
    budget: Estimate
    risk: Estimate
    value: Estimate
    prob_no_loss: float

    @property
    def passed(self) -> bool:
        return self.budget.passed and self.risk.passed and self.value.passed

    def to_dict(self) -> dict:
        out = dict(paths=self.paths, seed=self.seed, passed=self.passed, prob_no_loss=self.prob_no_loss)
        for name in ("budget", "risk", "value"):
            e = getattr(self, name)
            out[name] = dict(estimate=e.estimate, se=e.se, target=e.target, passed=e.passed)
        return out


def _strata(spec, plan, paths: int, rng) -> list[tuple[float, np.ndarray]]:
    """(probability, sample) pairs for {xi <= c*} and {xi > c*}.

    The shortfall region can carry tiny probability with a very large loss, so
    it gets a fixed share of the paths instead of a proportional one.
    """
    model = spec.density
    c = plan.c_star
    p_tail = model.sf(c) if plan.shortfall is not None and math.isfinite(c) else 0.0
    if p_tail <= 0.0 or p_tail >= 1.0:
        return [(1.0, model.sample(rng, paths))]
    n_tail = max(paths // 5, 2 * TAIL_BATCHES)
    return [(1.0 - p_tail, model.sample_between(rng, paths - n_tail, 0.0, c)),
            (p_tail, model.sample_between(rng, n_tail, c, math.inf))]


def _stratified_mean(strata, f) -> tuple[float, float]:
    est, var = 0.0, 0.0
    for w, xi in strata:
        v = f(xi)
        est += w * v.mean()
        var += w**2 * v.var(ddof=1) / v.size
    return float(est), math.sqrt(var)


def _stratified_risk(risk: RiskSpec, strata, claim) -> tuple[float, float]:
    if isinstance(risk, Entropic):
        m, se = _stratified_mean(strata, lambda xi: np.exp(-np.minimum(claim(xi), 0.0) / risk.beta))
        return risk.beta * math.log(m), risk.beta * se / m

    def pooled(parts):
        y = np.concatenate([np.minimum(claim(xi), 0.0) for _, xi in parts])
        probs = np.concatenate([np.full(xi.size, w / xi.size) for w, xi in parts])
        return eval_risk(risk, y, probs)

    est = pooled(strata)
    # Batch means: the j-th batch pools the j-th slice of every stratum.
    slices = [[(w, chunk) for chunk in np.array_split(xi, TAIL_BATCHES)] for w, xi in strata]
    parts = [pooled([s[j] for s in slices]) for j in range(TAIL_BATCHES)]
    return float(est), float(np.std(parts, ddof=1) / math.sqrt(TAIL_BATCHES))


def verify_solution(spec, plan, paths: int | None = None, seed: int | None = None,
                    tol: float = 1e-6) -> VerificationReport:
    """Seeded Monte Carlo check of the budget, risk and value of a plan.

    Sampling is stratified on the gains and shortfall regions.  Each estimate
    must sit within three standard errors (plus ``tol``) of its target; the
    risk check is one-sided.
    """
    from .planner import Classification

    if seed is None:
        raise SeedMissing("verification needs an explicit seed")
    if plan.classification == Classification.UNBOUNDED:
        raise ValueError("an UNBOUNDED plan carries no claim to verify")
    paths = int(paths or spec.numerics.mc_paths)
    rng = np.random.default_rng(seed)
    strata = _strata(spec, plan, paths, rng)

    def claim(xi):
        return np.asarray(plan.claim(xi), dtype=float)

    b_est, b_se = _stratified_mean(strata, lambda xi: xi * claim(xi))
    budget = Estimate(b_est, b_se, spec.x0, bool(abs(b_est - spec.x0) <= 3 * b_se + tol))

    r_est, r_se = _stratified_risk(spec.risk, strata, claim)
    risk = Estimate(r_est, r_se, spec.rho0, bool(r_est <= spec.rho0 + 3 * r_se + tol))

    v_est, v_se = _stratified_mean(strata, lambda xi: spec.utility.u(np.maximum(claim(xi), 0.0)))
    value = Estimate(v_est, v_se, plan.value, bool(abs(v_est - plan.value) <= 3 * v_se + tol))
    no_loss, _ = _stratified_mean(strata, lambda xi: (claim(xi) >= 0).astype(float))
    return VerificationReport(paths, seed, budget, risk, value, no_loss)
