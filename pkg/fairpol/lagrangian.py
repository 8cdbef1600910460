"""
-----------------------------------------------------------------
fairpol - outcome-disparity controlled policy learning
-----------------------------------------------------------------

Augmented-Lagrangian machinery for inequality constraints c(x) <= b.

The inner maximization over the multiplier, with a proximal penalty
||lambda - lambda'||^2 / (2 mu), has the closed form used by
`multiplier_update`; substituting it back gives the two-branch penalty
`penalty_phi`. Training loops minimize

    -utility + sum over pairs of phi(c_pair - slack, lambda_pair, mu)

and call `schedule_step` every `update_period` optimizer steps.
"""

import math
from dataclasses import dataclass, field, replace

from .errors import ContractError


@dataclass(frozen=True)
class LagrangianState:
    """
    Multipliers and penalty schedule.

    lambdas maps a group pair to its multiplier; slack is the tolerated
    constraint level b (epsilon), shared by all pairs.
    """
    lambdas: dict = field(default_factory=lambda: {(0, 1): 0.0})
    penalty_mu: float = 1.0
    slack: float = 0.0
    growth: float = 1.5
    update_period: int = 50

    def __post_init__(self):
        if any(lam < 0 for lam in self.lambdas.values()):
            raise ContractError("multipliers must be >= 0")
        if not self.penalty_mu > 0:
            raise ContractError(f"penalty_mu must be > 0, got {self.penalty_mu}")
        if self.growth < 1:
            raise ContractError(f"growth must be >= 1, got {self.growth}")
        if self.slack < 0:
            raise ContractError(f"slack must be >= 0, got {self.slack}")
        if int(self.update_period) < 1:
            raise ContractError("update_period must be >= 1")


def _branch_point(lambda_prev, penalty_mu):
    return -lambda_prev / penalty_mu


def multiplier_update(k, lambda_prev, penalty_mu):
    """
    Closed-form multiplier: 0 if k <= -lambda'/mu else lambda' + mu * k.

    Args:
        k (float): Constraint violation c(x) - b.
        lambda_prev (float): Previous multiplier (>= 0).
        penalty_mu (float): Penalty weight (> 0).

    Returns:
        float: The new multiplier, always >= 0.
    """
    if lambda_prev < 0 or not penalty_mu > 0:
        raise ContractError("need lambda_prev >= 0 and penalty_mu > 0")
    if k <= _branch_point(lambda_prev, penalty_mu):
        return 0.0
    return max(0.0, lambda_prev + penalty_mu * k)


def penalty_phi(k, lambda_prev, penalty_mu):
    """
    Two-branch penalty.

    -lambda'^2 / (2 mu) when k <= -lambda'/mu, otherwise
    lambda' * k + mu * k^2 / 2. Continuous and once differentiable.
    """
    if lambda_prev < 0 or not penalty_mu > 0:
        raise ContractError("need lambda_prev >= 0 and penalty_mu > 0")
    if k <= _branch_point(lambda_prev, penalty_mu):
        return -lambda_prev ** 2 / (2.0 * penalty_mu)
    return lambda_prev * k + penalty_mu * k ** 2 / 2.0


def penalty_phi_slope(k, lambda_prev, penalty_mu):
    """d phi / d k: 0 on the feasible branch, lambda' + mu * k otherwise."""
    if k <= _branch_point(lambda_prev, penalty_mu):
        return 0.0
    return lambda_prev + penalty_mu * k


def _violation(value, slack):
    # An infinite slack makes every constraint vacuous.
    return -math.inf if math.isinf(slack) else value - slack


def augmented_objective(utility, violations, state):
    """
    Minimization loss -utility + sum_pairs phi(value - slack, lambda_pair, mu).

    Args:
        utility (float): Estimated expected outcome of the policy.
        violations (PairwiseConstraint): Constraint values per pair.
        state (LagrangianState): Current multipliers and penalty.

    Returns:
        float: The scalar loss.
    """
    if sorted(violations.values) != sorted(state.lambdas):
        raise ContractError(f"constraint pairs {sorted(violations.values)} do not match multipliers {sorted(state.lambdas)}")
    loss = -float(utility)
    for pair, lam in state.lambdas.items():
        loss += penalty_phi(_violation(violations[pair], state.slack), lam, state.penalty_mu)
    return loss


def augmented_slopes(violations, state):
    """d loss / d value per pair, used to chain constraint gradients."""
    return {pair: penalty_phi_slope(_violation(violations[pair], state.slack), lam, state.penalty_mu)
            for pair, lam in state.lambdas.items()}


def schedule_step(state, violations):
    """
    Update every multiplier in closed form, then grow the penalty weight.

    Args:
        state (LagrangianState): State before the update.
        violations (PairwiseConstraint): Current constraint values.

    Returns:
        LagrangianState: The new state.
    """
    lambdas = {pair: multiplier_update(_violation(violations[pair], state.slack), lam, state.penalty_mu)
               for pair, lam in state.lambdas.items()}
    return replace(state, lambdas=lambdas, penalty_mu=state.penalty_mu * state.growth)


def metrics_row(step, state, violations):
    """One metrics-CSV row: step, lambda, penalty_mu, violation (first pair)."""
    pair = sorted(state.lambdas)[0]
    return {
        "step": int(step),
        "lambda": float(state.lambdas[pair]),
        "penalty_mu": float(state.penalty_mu),
        "violation": float(violations[pair]),
    }
