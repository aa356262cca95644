"""Exception types raised by the solver."""


class GuarantorError(Exception):
    """Base class for all solver errors."""


class ConfigError(GuarantorError, ValueError):
    """Invalid problem configuration (bad parameters, violated preconditions)."""


class NonConvergent(GuarantorError, ArithmeticError):
    """A numerical integral or expectation failed to reach tolerance."""


class BracketFailure(GuarantorError, ArithmeticError):
    """No sign change found while bracketing a monotone root."""


class InfeasibleTail(GuarantorError, ValueError):
    """The shortfall region {xi > c} has zero probability."""


class BudgetExceeded(GuarantorError, ValueError):
    """Brute-force enumeration requested beyond its state budget."""


class SeedMissing(GuarantorError, ValueError):
    """Monte Carlo verification requires an explicit seed."""
