"""When does a CVaR-constrained guarantee have an optimum?

With an unbounded state-price density the subsidy a CVaR budget can buy is
unbounded, so the problem is UNBOUNDED.  Truncating the density restores a
finite value; depending on the budget the optimum is interior or only
approached at the top of the support, in which case an epsilon-optimal claim
is returned.
"""
from guarantor.density import Lognormal, TruncatedLognormal
from guarantor.planner import Numerics, ProblemSpec, solve
from guarantor.riskmeasure import CVaR
from guarantor.utility import Exponential

S = 0.375
u = Exponential(0.6)
num = Numerics(grid_points=128)


def show(label, spec):
    plan = solve(spec)
    line = f"{label:<38} {plan.classification.value:<11} value={plan.value:.6f}"
    if plan.classification.value == "NO_OPTIMUM":
        line += f" eps={plan.epsilon:.2e} sup={plan.sup_value:.6f}"
    elif plan.classification.value == "OPTIMAL":
        line += f" q*={plan.q_star:.4f}"
    print(line)


show("untruncated, CVaR(0.5)", ProblemSpec(1.5, 0.0, 1.5, Lognormal(S), u, CVaR(0.5), numerics=num))
for upper in (2.0, 3.0, 4.0):
    show(f"truncated at {upper}, CVaR(0.5), x0=1.5",
         ProblemSpec(1.5, 0.0, 1.5, TruncatedLognormal(S, upper), u, CVaR(0.5), numerics=num))
for beta in (0.05, 0.1, 0.3):
    show(f"truncated at 3.0, CVaR({beta}), x0=0.2",
         ProblemSpec(0.2, 0.0, 2.0, TruncatedLognormal(S, 3.0), u, CVaR(beta), numerics=num))
