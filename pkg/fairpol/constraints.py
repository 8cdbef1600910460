"""
-----------------------------------------------------------------
fairpol - outcome-disparity controlled policy learning
-----------------------------------------------------------------

Disparity constraints.

Key features:
- ModBrk statistic: squared gap between group means of the S-moderated
  component g at the policy's actions
- Gaussian difference-CDF P(Y_sigma - Y_base <= z | s, x) for a given correlation
- Tightest bounds over the unknown correlation (rho = -1 or 1 by sign of z - mu)
- Group-averaged bound curves F^L_s, F^U_s on a grid and the EqB value
- Analytic gradients of both constraints for the phase-II training loop
- Frechet-Hoeffding copula bounds

Usage:
- Use `modbrk_value()` / `modbrk_value_and_grad()` for ModBrk.
- Use `eqb_curves()` + `eqb_value()` for EqB, or `eqb_value_and_grad()` while training.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.special import ndtr

from .errors import ContractError

INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)
GROUPS = (0, 1)


@dataclass(frozen=True)
class PairwiseConstraint:
    """
    Nonnegative constraint value per group pair.

    Values are stored under the canonical key (s, s_bar) with s < s_bar and
    can be read with either order.
    """
    values: dict = field(default_factory=dict)

    def __getitem__(self, pair):
        s, s_bar = pair
        return self.values[(min(s, s_bar), max(s, s_bar))]

    @property
    def pairs(self):
        return sorted(self.values)

    def max(self):
        return max(self.values.values()) if self.values else 0.0

    @classmethod
    def single(cls, value, pair=(0, 1)):
        return cls({(min(pair), max(pair)): float(value)})


@dataclass(frozen=True)
class DiffGaussianParams:
    mu_diff: float
    variance: float
    rho: float = 0.0

    def __post_init__(self):
        if not self.variance > 0:
            raise ContractError(f"variance must be > 0, got {self.variance}")
        if not -1.0 <= self.rho <= 1.0:
            raise ContractError(f"rho must lie in [-1, 1], got {self.rho}")


@dataclass(frozen=True)
class FrechetBound:
    lower: float
    upper: float


@dataclass
class BoundCurves:
    """F_lower[s] and F_upper[s] are aligned with grid, one row per group."""
    grid: np.ndarray
    F_lower: np.ndarray
    F_upper: np.ndarray

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.F_lower = np.asarray(self.F_lower, dtype=float)
        self.F_upper = np.asarray(self.F_upper, dtype=float)
        expected = (len(GROUPS), self.grid.size)
        if self.F_lower.shape != expected or self.F_upper.shape != expected:
            raise ContractError(f"bound arrays must have shape {expected}")

    def to_frame(self):
        return pd.DataFrame({
            "z": self.grid,
            "FL_s0": self.F_lower[0], "FU_s0": self.F_upper[0],
            "FL_s1": self.F_lower[1], "FU_s1": self.F_upper[1],
        })


def _group_masks(s):
    s = np.asarray(s)
    masks = {g: s == g for g in GROUPS}
    for g, mask in masks.items():
        if not mask.any():
            raise ContractError(f"group s={g} has no rows")
    return masks


# ---------------------------------------------------------------------------
# ModBrk
# ---------------------------------------------------------------------------

def modbrk_value_and_grad(outcome, actions, s, X):
    """
    ModBrk statistic at given actions and its gradient w.r.t. each action.

    value = (mean_{s_i=0} g(a_i, 0, x_i) - mean_{s_i=1} g(a_i, 1, x_i))^2

    Args:
        outcome (StructuredOutcomeNet): Phase-I model providing g.
        actions (np.ndarray): One action per row.
        s (np.ndarray): Group labels.
        X (np.ndarray): Covariates (n, d).

    Returns:
        tuple: (PairwiseConstraint, dValue/dAction of length n)
    """
    masks = _group_masks(s)
    actions = np.asarray(actions, dtype=float)
    g_vals = outcome.g_values(actions, s, X)
    means = {grp: float(np.mean(g_vals[m])) for grp, m in masks.items()}
    gap = means[0] - means[1]

    dg_da = outcome.g_action_gradient(actions, s, X)
    grad = np.zeros_like(actions)
    grad[masks[0]] = 2.0 * gap * dg_da[masks[0]] / masks[0].sum()
    grad[masks[1]] = -2.0 * gap * dg_da[masks[1]] / masks[1].sum()
    return PairwiseConstraint.single(gap ** 2), grad


def modbrk_value(outcome, policy, dataset):
    """
    ModBrk constraint of a policy on a dataset.

    Args:
        outcome (StructuredOutcomeNet): Phase-I model providing g.
        policy: Object with `actions(s, X)` (a PolicySpec) or an array of
            per-row actions.
        dataset (Dataset): Rows to average over; both groups required.

    Returns:
        PairwiseConstraint: The squared gap for the pair (0, 1).
    """
    if hasattr(policy, "actions"):
        actions = policy.actions(dataset.s, dataset.X)
    else:
        actions = np.asarray(policy, dtype=float)
    value, _ = modbrk_value_and_grad(outcome, actions, dataset.s, dataset.X)
    return value


# ---------------------------------------------------------------------------
# Gaussian difference CDF and its bounds
# ---------------------------------------------------------------------------

def gaussian_diff_cdf(z, params):
    """
    P(Y_sigma - Y_base <= z | s, x) under the joint Gaussian model.

    Phi((z - mu_diff) / sqrt(2 V (1 - rho))); at rho = 1 the difference is
    degenerate at mu_diff and the limit (0, 0.5 or 1) is returned.

    Args:
        z (float or np.ndarray): Evaluation point(s).
        params (DiffGaussianParams): Mean difference, marginal variance, rho.

    Returns:
        float or np.ndarray: Probabilities.
    """
    z = np.asarray(z, dtype=float)
    d = z - params.mu_diff
    if params.rho >= 1.0:
        out = np.where(d > 0, 1.0, np.where(d < 0, 0.0, 0.5))
    else:
        out = ndtr(d / np.sqrt(2.0 * params.variance * (1.0 - params.rho)))
    return float(out) if out.ndim == 0 else out


def _bounds_from_gap(d, variance):
    # rho = -1 branch: Phi(d / (2 sqrt(V))); rho = 1 branch is the step.
    scale = 2.0 * np.sqrt(variance)
    phi = ndtr(d / scale)
    lower = np.where(d > 0, phi, np.where(d < 0, 0.0, 0.5))
    upper = np.where(d > 0, 1.0, np.where(d < 0, phi, 0.5))
    return lower, upper


def tight_bounds_point(z, mu_diff, variance):
    """
    Tightest bounds on the difference CDF over rho in [-1, 1].

    For z > mu_diff the bounds are (f(-1), f(1)); for z < mu_diff they are
    (f(1), f(-1)); at z == mu_diff both are 0.5.

    Returns:
        tuple: (lower, upper), floats or arrays broadcast over z and mu_diff.
    """
    if not variance > 0:
        raise ContractError(f"variance must be > 0, got {variance}")
    d = np.asarray(z, dtype=float) - np.asarray(mu_diff, dtype=float)
    lower, upper = _bounds_from_gap(d, variance)
    if lower.ndim == 0:
        return float(lower), float(upper)
    return lower, upper


def default_grid(mu, vY, points=41):
    """
    Grid spanning [min mu - 3 sqrt(4 V), max mu + 3 sqrt(4 V)].

    sqrt(4 V) is the standard deviation of the widest (rho = -1) difference.
    """
    if not vY > 0:
        raise ContractError(f"vY must be > 0, got {vY}")
    mu = np.asarray(mu, dtype=float)
    half = 3.0 * np.sqrt(4.0 * vY)
    return np.linspace(float(mu.min()) - half, float(mu.max()) + half, int(points))


def _check_grid(grid):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ContractError("grid must be a strictly increasing 1-D array")
    return grid


def _curves_core(s, mu, vY, grid):
    masks = _group_masks(s)
    if not vY > 0:
        raise ContractError(f"vY must be > 0, got {vY}")
    grid = _check_grid(grid)
    F_lower = np.zeros((len(GROUPS), grid.size))
    F_upper = np.zeros((len(GROUPS), grid.size))
    per_row = {}
    for grp, mask in masks.items():
        d = grid[None, :] - mu[mask][:, None]
        lower, upper = _bounds_from_gap(d, vY)
        F_lower[grp] = lower.mean(axis=0)
        F_upper[grp] = upper.mean(axis=0)
        per_row[grp] = d
    return BoundCurves(grid, F_lower, F_upper), masks, per_row


def eqb_curves(dataset, mu_sigma, mu_base, vY, grid):
    """
    Group-averaged lower/upper bound curves of the gain CDF.

    F^L_s(z) = mean over rows of group s of the lower bound at (z, mu_i),
    with mu_i = mu_sigma_i - mu_base_i; F^U_s likewise.

    Args:
        dataset (Dataset): Supplies the group labels.
        mu_sigma (np.ndarray): Per-row outcome mean under the new policy.
        mu_base (np.ndarray): Per-row outcome mean under the baseline policy.
        vY (float): Homoskedastic outcome variance.
        grid (np.ndarray): Strictly increasing evaluation grid.

    Returns:
        BoundCurves: Curves for s = 0 and s = 1.
    """
    mu = np.asarray(mu_sigma, dtype=float) - np.asarray(mu_base, dtype=float)
    if mu.shape != (len(dataset),):
        raise ContractError("per-row means must align with dataset rows")
    curves, _, _ = _curves_core(dataset.s, mu, vY, grid)
    return curves


def eqb_value(curves):
    """
    Sum over the grid of squared group gaps of both bound curves.

    Returns:
        PairwiseConstraint: Value for the pair (0, 1).
    """
    if curves.F_lower.shape[1] != curves.grid.size:
        raise ContractError("bound curves do not match their grid")
    lower_gap = curves.F_lower[0] - curves.F_lower[1]
    upper_gap = curves.F_upper[0] - curves.F_upper[1]
    return PairwiseConstraint.single(float(np.sum(lower_gap ** 2) + np.sum(upper_gap ** 2)))


def eqb_value_and_grad(s, mu_sigma, mu_base, vY, grid):
    """
    EqB value and its gradient w.r.t. each row's mu_sigma.

    The chain rule runs through Phi: d lower_i(z)/d mu_i is
    -phi(d/(2 sqrt V)) / (2 sqrt V) where z > mu_i and 0 elsewhere; the upper
    bound mirrors this on z < mu_i.

    Returns:
        tuple: (PairwiseConstraint, BoundCurves, gradient of length n)
    """
    mu = np.asarray(mu_sigma, dtype=float) - np.asarray(mu_base, dtype=float)
    curves, masks, gaps = _curves_core(s, mu, vY, grid)
    lower_gap = curves.F_lower[0] - curves.F_lower[1]
    upper_gap = curves.F_upper[0] - curves.F_upper[1]
    value = PairwiseConstraint.single(float(np.sum(lower_gap ** 2) + np.sum(upper_gap ** 2)))

    scale = 2.0 * np.sqrt(vY)
    grad = np.zeros_like(mu)
    for grp, sign in ((0, 1.0), (1, -1.0)):
        d = gaps[grp]
        dens = INV_SQRT_2PI * np.exp(-0.5 * (d / scale) ** 2) / scale
        d_lower = np.where(d > 0, -dens, 0.0)
        d_upper = np.where(d < 0, -dens, 0.0)
        n_grp = masks[grp].sum()
        row_grad = (2.0 * sign / n_grp) * (d_lower @ lower_gap + d_upper @ upper_gap)
        grad[masks[grp]] = row_grad
    return value, curves, grad


def save_curves(curves, path):
    """Write z,FL_s0,FU_s0,FL_s1,FU_s1."""
    curves.to_frame().to_csv(path, index=False)
    logging.info(f"Saved bound curves to {path}")


# ---------------------------------------------------------------------------
# Copula bounds
# ---------------------------------------------------------------------------

def frechet_bounds(u, v):
    """
    Frechet-Hoeffding bounds max(u + v - 1, 0) <= C(u, v) <= min(u, v).

    Args:
        u (float): Marginal probability in [0, 1].
        v (float): Marginal probability in [0, 1].

    Returns:
        FrechetBound: (lower, upper).
    """
    for name, p in (("u", u), ("v", v)):
        if not 0.0 <= p <= 1.0:
            raise ContractError(f"{name} must lie in [0, 1], got {p}")
    return FrechetBound(lower=max(u + v - 1.0, 0.0), upper=min(u, v))
