"""
-----------------------------------------------------------------
fairpol - outcome-disparity controlled policy learning
-----------------------------------------------------------------

Utility estimators and policy plumbing.

Key features:
- PolicySpec: deterministic (clipped) or Gaussian-mean policies over [s, x]
- Per-stratum action clipping intervals widened by an extrapolation factor
- Plug-in utility through a fitted outcome model
- Inverse-probability-weighted utility for Gaussian-mean policies
- MAP estimate of the baseline outcome mean and residual variances

Usage:
- Build a `ClipTable` with `clip_interval()` and attach it to a deterministic `PolicySpec`.
- Use `plugin_utility()` in ModBrk training and `ipw_utility()` in EqB training.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .nnet import clipped_backward, clipped_forward, net_backward, net_forward, net_forward_cached, stack_inputs

DETERMINISTIC = "deterministic"
GAUSSIAN_MEAN = "gaussian-mean"
POLICY_KINDS = (DETERMINISTIC, GAUSSIAN_MEAN)
GROUPS = (0, 1)

DENSITY_FLOOR = 1e-12
VARIANCE_FLOOR = 1e-8


# ---------------------------------------------------------------------------
# Clipping
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClipBinning:
    """
    How rows are split into clipping strata.

    Binary covariates are used as-is; every other covariate is cut into
    `quantile_bins` quantile bins. Strata with fewer than `min_stratum` rows
    fall back to the interval of all rows with the same s.
    """
    quantile_bins: int = 2
    min_stratum: int = 10
    floor_width: float = 1e-3

    def __post_init__(self):
        if int(self.quantile_bins) < 1:
            raise ContractError("quantile_bins must be >= 1")
        if int(self.min_stratum) < 1:
            raise ContractError("min_stratum must be >= 1")
        if not self.floor_width > 0:
            raise ContractError("floor_width must be > 0")


@dataclass
class ClipTable:
    """Interval [lo, hi] per stratum key (s, bin_0, ..., bin_{d-1})."""
    intervals: dict
    group_intervals: dict
    edges: list
    eta: float = 1.0
    binning: ClipBinning = field(default_factory=ClipBinning)

    def __post_init__(self):
        for key, (lo, hi) in list(self.intervals.items()) + list(self.group_intervals.items()):
            if not lo < hi:
                raise ContractError(f"stratum {key}: interval needs lo < hi, got [{lo}, {hi}]")

    def key_matrix(self, s, X):
        """(n, 1 + d) integer matrix of stratum keys."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != len(self.edges):
            raise ContractError(f"expected {len(self.edges)} covariates, got {X.shape[1]}")
        s = np.broadcast_to(np.asarray(s).astype(int), (X.shape[0],))
        return np.column_stack([s] + [_bin_column(X[:, j], edge) for j, edge in enumerate(self.edges)])

    def keys(self, s, X):
        return [tuple(int(v) for v in row) for row in self.key_matrix(s, X)]

    def lookup(self, s, X):
        """Per-row (lo, hi) arrays; unknown or merged strata use the group interval."""
        K = self.key_matrix(s, X)
        lo = np.full(K.shape[0], np.nan)
        hi = np.full(K.shape[0], np.nan)
        for grp, (g_lo, g_hi) in self.group_intervals.items():
            mask = K[:, 0] == grp
            lo[mask], hi[mask] = g_lo, g_hi
        for key, (k_lo, k_hi) in self.intervals.items():
            mask = np.all(K == np.asarray(key), axis=1)
            lo[mask], hi[mask] = k_lo, k_hi
        if np.isnan(lo).any():
            raise ContractError("rows outside every clipping stratum")
        return lo, hi

    def to_rows(self):
        rows = [{"stratum": "|".join(map(str, key)), "lo": lo, "hi": hi}
                for key, (lo, hi) in sorted(self.intervals.items())]
        rows += [{"stratum": f"{grp}|*", "lo": lo, "hi": hi} for grp, (lo, hi) in sorted(self.group_intervals.items())]
        return rows


def _bin_column(values, edges):
    # edges None marks a binary column
    if edges is None:
        return values.astype(int)
    return np.searchsorted(edges, values, side="right")


def _column_edges(values, q):
    if np.isin(values, (0.0, 1.0)).all():
        return None
    if q <= 1:
        return np.array([])
    return np.unique(np.quantile(values, np.arange(1, q) / q))


def _interval(actions, eta, floor_width, label):
    a_min, a_max = float(actions.min()), float(actions.max())
    gap = a_max - a_min
    if gap <= 0:
        logging.warning(f"Clip stratum {label}: single distinct action {a_min}, widening by {floor_width}")
        return a_min - floor_width / 2.0, a_max + floor_width / 2.0
    return a_min - eta * gap, a_max + eta * gap


def clip_interval(dataset, binning=None, eta=1.0):
    """
    Per-stratum clipping intervals [min - eta * gap, max + eta * gap].

    Args:
        dataset (Dataset): Observed rows; their actions define the intervals.
        binning (ClipBinning): Stratification settings.
        eta (float): Extrapolation factor (>= 0).

    Returns:
        ClipTable: Intervals per populated stratum plus one per group.
    """
    binning = binning or ClipBinning()
    if eta < 0:
        raise ContractError(f"eta must be >= 0, got {eta}")
    edges = [_column_edges(dataset.X[:, j], int(binning.quantile_bins)) for j in range(dataset.d)]
    table = ClipTable(intervals={}, group_intervals={}, edges=edges, eta=eta, binning=binning)
    keys = table.keys(dataset.s, dataset.X)

    strata = {}
    for i, key in enumerate(keys):
        strata.setdefault(key, []).append(i)

    for grp in GROUPS:
        acts = dataset.a[dataset.s == grp]
        table.group_intervals[grp] = _interval(acts, eta, binning.floor_width, f"s={grp}")
    merged = 0
    for key, rows in sorted(strata.items()):
        if len(rows) < binning.min_stratum:
            merged += 1
            continue
        table.intervals[key] = _interval(dataset.a[rows], eta, binning.floor_width, key)
    logging.info(f"Clip table: {len(table.intervals)} strata, {merged} merged into group intervals, eta={eta}")
    return table


# ---------------------------------------------------------------------------
# Policies
# ---------------------------------------------------------------------------

@dataclass
class PolicySpec:
    """
    A policy over (s, x).

    deterministic policies return the (optionally clipped) net output;
    gaussian-mean policies draw A ~ N(net(s, x), action_variance). With
    drop_s the net sees s = 0 for every row. constant_action replaces the
    net entirely.
    """
    kind: str = DETERMINISTIC
    net: object = None
    action_variance: float = 0.0
    clipping: ClipTable = None
    drop_s: bool = False
    constant_action: float = None

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ContractError(f"unknown policy kind '{self.kind}'")
        if self.kind == GAUSSIAN_MEAN and not self.action_variance > 0:
            raise ContractError("gaussian-mean policy needs action_variance > 0")
        if self.kind == DETERMINISTIC and self.action_variance != 0:
            raise ContractError("deterministic policy must have action_variance 0")
        if self.net is None and self.constant_action is None:
            raise ContractError("policy needs a net or a constant action")

    def inputs(self, s, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        s = np.broadcast_to(np.asarray(s, dtype=float), (X.shape[0],))
        return stack_inputs(np.zeros_like(s) if self.drop_s else s, X)

    def forward(self, s, X):
        """Mean actions plus a cache for `backward`."""
        if self.constant_action is not None:
            n = np.atleast_2d(X).shape[0]
            return np.full(n, float(self.constant_action)), None
        inputs = self.inputs(s, X)
        if self.clipping is not None:
            lo, hi = self.clipping.lookup(s, X)
            actions, cache = clipped_forward(self.net, inputs, lo, hi)
            return actions, ("clipped", cache)
        out, cache = net_forward_cached(self.net, inputs)
        return out[:, 0], ("plain", cache)

    def backward(self, cache, d_actions):
        """Parameter gradients given dLoss/dAction per row."""
        if cache is None:
            return {}
        mode, inner = cache
        if mode == "clipped":
            return clipped_backward(self.net, inner, d_actions)
        grads, _ = net_backward(self.net, inner, np.asarray(d_actions, dtype=float)[:, None])
        return grads

    def actions(self, s, X):
        return self.forward(s, X)[0]

    def sample(self, s, X, rng):
        mean = self.actions(s, X)
        if self.kind == DETERMINISTIC:
            return mean
        return mean + rng.normal(0.0, np.sqrt(self.action_variance), mean.shape)


@dataclass(frozen=True)
class VarianceEstimates:
    vA: float
    vY: float

    def __post_init__(self):
        if not (self.vA > 0 and self.vY > 0):
            raise ContractError(f"variances must be > 0, got vA={self.vA}, vY={self.vY}")


@dataclass(frozen=True)
class UtilityEstimate:
    overall: float
    per_group: dict

    def __getitem__(self, grp):
        return self.per_group[grp]


@dataclass(frozen=True)
class IPWEstimate(UtilityEstimate):
    excluded: int = 0
    clamped: int = 0


def _group_means(values, s):
    out = {}
    for grp in GROUPS:
        mask = s == grp
        if not mask.any():
            raise ContractError(f"group s={grp} has no rows")
        out[grp] = float(np.mean(values[mask]))
    return out


# ---------------------------------------------------------------------------
# Plug-in utility
# ---------------------------------------------------------------------------

def plugin_utility_and_grad(outcome, actions, s, X):
    """
    Plug-in utility at given actions and d overall / d action per row.

    Returns:
        tuple: (UtilityEstimate, gradient of length n)
    """
    actions = np.asarray(actions, dtype=float)
    s = np.asarray(s)
    pred = outcome.predict(actions, s, X)
    estimate = UtilityEstimate(float(np.mean(pred)), _group_means(pred, s))
    grad = outcome.action_gradient(actions, s, X) / pred.size
    return estimate, grad


def plugin_utility(outcome, policy, dataset):
    """
    Mean outcome-model prediction at the policy's actions.

    Args:
        outcome: StructuredOutcomeNet or MLPOutcomeNet.
        policy (PolicySpec): A deterministic policy.
        dataset (Dataset): Rows to average over.

    Returns:
        UtilityEstimate: Overall mean and per-group means.
    """
    if policy.kind != DETERMINISTIC:
        raise ContractError("plug-in utility needs a deterministic policy")
    pred = outcome.predict(policy.actions(dataset.s, dataset.X), dataset.s, dataset.X)
    return UtilityEstimate(float(np.mean(pred)), _group_means(pred, dataset.s))


# ---------------------------------------------------------------------------
# Inverse probability weighting
# ---------------------------------------------------------------------------

def ipw_utility_and_grad(s, a, y, mu_sigma, mu_base, vA, clamp=None, density_floor=DENSITY_FLOOR):
    """
    IPW utility from per-row policy means and its gradient w.r.t. mu_sigma.

    w_i = N(a_i; mu_sigma_i, vA) / N(a_i; mu_base_i, vA). Rows whose baseline
    density is below density_floor are excluded. Overall utility is
    normalized by the number of kept rows, per-group utilities by the kept
    rows of each group.

    Returns:
        tuple: (IPWEstimate, d overall / d mu_sigma of length n)
    """
    if not vA > 0:
        raise ContractError(f"vA must be > 0, got {vA}")
    s = np.asarray(s)
    a = np.asarray(a, dtype=float)
    y = np.asarray(y, dtype=float)
    mu_sigma = np.asarray(mu_sigma, dtype=float)
    mu_base = np.asarray(mu_base, dtype=float)

    base_density = np.exp(-0.5 * (a - mu_base) ** 2 / vA) / np.sqrt(2.0 * np.pi * vA)
    keep = base_density >= density_floor
    excluded = int((~keep).sum())
    if excluded:
        logging.warning(f"IPW: {excluded} rows excluded, baseline density below {density_floor}")
    if not keep.any():
        raise ContractError("IPW: every row was excluded")

    log_w = ((a - mu_base) ** 2 - (a - mu_sigma) ** 2) / (2.0 * vA)
    weights = np.where(keep, np.exp(np.where(keep, log_w, 0.0)), 0.0)
    dw = weights * (a - mu_sigma) / vA
    clamped = 0
    if clamp is not None:
        over = weights > clamp
        clamped = int(over.sum())
        weights = np.where(over, float(clamp), weights)
        dw = np.where(over, 0.0, dw)

    n_kept = int(keep.sum())
    contrib = y * weights
    per_group = {}
    for grp in GROUPS:
        mask = keep & (s == grp)
        if not mask.any():
            raise ContractError(f"IPW: no usable rows with s={grp}")
        per_group[grp] = float(contrib[mask].sum() / mask.sum())
    estimate = IPWEstimate(overall=float(contrib[keep].sum() / n_kept), per_group=per_group,
                           excluded=excluded, clamped=clamped)
    grad = np.where(keep, y * dw / n_kept, 0.0)
    return estimate, grad


def ipw_utility(dataset, policy, baseline_mu, vA, clamp=None, density_floor=DENSITY_FLOOR):
    """
    Inverse-probability-weighted utility of a Gaussian-mean policy.

    Args:
        dataset (Dataset): Observed rows generated by the baseline policy.
        policy (PolicySpec): A gaussian-mean policy.
        baseline_mu (np.ndarray): Baseline mean action per row.
        vA (float): Shared action variance.
        clamp (float): Optional upper clamp on the weights.
        density_floor (float): Minimum baseline density for a row to count.

    Returns:
        IPWEstimate: Overall and per-group utilities, excluded and clamped counts.
    """
    if policy.kind != GAUSSIAN_MEAN:
        raise ContractError("IPW utility needs a gaussian-mean policy")
    baseline_mu = np.asarray(baseline_mu, dtype=float)
    if baseline_mu.shape != (len(dataset),):
        raise ContractError("baseline_mu must have one entry per row")
    estimate, _ = ipw_utility_and_grad(dataset.s, dataset.a, dataset.y, policy.actions(dataset.s, dataset.X),
                                       baseline_mu, vA, clamp, density_floor)
    return estimate


# ---------------------------------------------------------------------------
# Baseline outcome and variances
# ---------------------------------------------------------------------------

def map_baseline_outcome(outcome_net, baseline_policy_net, s, x):
    """
    Outcome mean evaluated at the baseline policy's mean action.

    Args:
        outcome_net: Outcome model with `predict(a, s, X)`.
        baseline_policy_net (AffineNet): Baseline policy over [s, x].
        s: Group label(s).
        x: Covariates (d,) or (n, d).

    Returns:
        float or np.ndarray: One value per row (a float for a single row).
    """
    single = np.ndim(x) == 1
    X = np.atleast_2d(np.asarray(x, dtype=float))
    s = np.broadcast_to(np.asarray(s, dtype=float), (X.shape[0],))
    a_base = net_forward(baseline_policy_net, stack_inputs(s, X))[:, 0]
    out = outcome_net.predict(a_base, s, X)
    return float(out[0]) if single else out


def _mean_square(residuals, name):
    r = np.asarray(residuals, dtype=float).ravel()
    if r.size == 0:
        raise ContractError(f"{name} residuals are empty")
    value = float(np.mean(r ** 2))
    if value <= 0:
        logging.warning(f"{name} residual variance is 0, using floor {VARIANCE_FLOOR}")
        value = VARIANCE_FLOOR
    return value


def estimate_variances(action_residuals, outcome_residuals):
    """
    Homoskedastic variances as mean squared residuals.

    Returns:
        VarianceEstimates: vA and vY, floored at 1e-8.
    """
    return VarianceEstimates(vA=_mean_square(action_residuals, "action"),
                             vY=_mean_square(outcome_residuals, "outcome"))
