"""Optimal payoffs for guaranteed funds under a risk limit on the shortfall.

The solver splits the claim into a gains part on a lower set {xi <= c} and a
shortfall part on its complement, solves both in closed form or by
one-dimensional root finding, and searches over ``c``.
"""
from .density import Discrete, DensityModel, Lognormal, TruncatedLognormal
from .errors import (BracketFailure, BudgetExceeded, ConfigError, GuarantorError, InfeasibleTail,
                     NonConvergent, SeedMissing)
from .gains import GainsSolution, solve_gains, value, value_bound
from .oracle import (OracleInstance, OracleResult, direct_search, discretize, enumerate_solve,
                     rearrangement_check, reconstruct_claim, verify_solution)
from .planner import (BlackScholesMarket, BSPayoff, Classification, Numerics, Plan, ProblemSpec,
                      bs_constants, bs_payoff_map, no_risk_benchmark, solve, value_curve)
from .riskmeasure import CVaR, Entropic, Spectral, eval_risk, penalty_at_density
from .shortfall import ShortfallSolution, ShortfallStatus, solve_shortfall
from .utility import Exponential, LogShifted, Power

__all__ = [
    "BlackScholesMarket", "BSPayoff", "BracketFailure", "BudgetExceeded", "CVaR", "Classification",
    "ConfigError", "DensityModel", "Discrete", "Entropic", "Exponential", "GainsSolution",
    "GuarantorError", "InfeasibleTail", "LogShifted", "Lognormal", "NonConvergent", "Numerics",
    "OracleInstance", "OracleResult", "Plan", "Power", "ProblemSpec", "SeedMissing",
    "ShortfallSolution", "ShortfallStatus", "Spectral", "TruncatedLognormal", "bs_constants",
    "bs_payoff_map", "direct_search", "discretize", "enumerate_solve", "eval_risk",
    "no_risk_benchmark", "penalty_at_density", "rearrangement_check", "reconstruct_claim", "solve",
    "solve_gains", "solve_shortfall", "value", "value_bound", "value_curve", "verify_solution",
]
