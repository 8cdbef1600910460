"""
-----------------------------------------------------------------
fairpol - outcome-disparity controlled policy learning
-----------------------------------------------------------------

Two-phase training, baselines and slack sweeps.

Phase I fits the outcome model (and, for EqB, the baseline policy net and
the residual variances). Phase II trains a new policy against the frozen
phase-I models under the augmented Lagrangian of the chosen constraint.
Sweeping the slack epsilon traces the utility/disparity frontier.

Key features:
- Phase I with holdout R^2 diagnostics and constant-action checks
- Phase II for ModBrk (plug-in utility, clipped deterministic policy)
- Phase II for EqB (IPW utility, Gaussian-mean policy cloned from the baseline)
- Baselines: unconstrained, without S, constant actions, the baseline policy
- Ground-truth constraint values on generator-backed data
- Parallel (epsilon, seed) sweeps with per-run metrics and action histograms

Usage:
- Build an `ExperimentConfig` (see `default_experiment()`), then call
  `phase1_train()` and `slack_sweep()`.
"""

import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import pandas as pd
from scipy.stats import ks_2samp
from tqdm import tqdm

from .constraints import default_grid, eqb_value_and_grad, modbrk_value, modbrk_value_and_grad
from .errors import ContractError, FairpolError, TrainingError
from .estimators import (DETERMINISTIC, GAUSSIAN_MEAN, ClipBinning, PolicySpec, UtilityEstimate,
                         clip_interval, estimate_variances, ipw_utility_and_grad, map_baseline_outcome,
                         plugin_utility, plugin_utility_and_grad)
from .lagrangian import LagrangianState, augmented_objective, augmented_slopes, metrics_row, schedule_step
from .nnet import (MLPOutcomeNet, OptimizerState, TrainConfig, adam_step, explained_variance, fit_regression,
                   fit_structured, net_forward, net_init, r2_score, stack_inputs, structured_init)

MODBRK = "modbrk"
EQB = "eqb"
CONSTRAINT_KINDS = (MODBRK, EQB)

FRONTIER_COLUMNS = ["epsilon", "seed", "utility", "utility_s0", "utility_s1", "constraint", "constraint_true"]
BASELINE_COLUMNS = ["name", "level", "utility", "utility_s0", "utility_s1", "constraint", "constraint_true"]
HISTOGRAM_COLUMNS = ["bin_lo", "bin_hi", "count_s0", "count_s1"]
METRICS_COLUMNS = ["step", "lambda", "penalty_mu", "violation"]
BASELINE_NAMES = ("unconstrained", "drop_s", "const_a", "baseline_policy")
EQB_COUPLING = "comonotone: shared action and outcome noise per row"

DESK_EPOCH_DIVISOR = 10
DESK_MIN_LR = 1e-3

# Full training settings per (constraint, data source).
FAITHFUL_SETTINGS = {
    (MODBRK, "nyc"): {
        "outcome": dict(hidden=256, depth=2, epochs=3000, lr=0.005, anchor_weight=1.0),
        "policy": dict(hidden=64, depth=2, epochs=3000, lr=0.001),
    },
    (MODBRK, "ihdp"): {
        "outcome": dict(hidden=512, depth=1, epochs=1000, lr=1e-3, weight_decay=0.1, anchor_weight=1.0),
        "policy": dict(hidden=50, depth=1, epochs=3000, lr=5e-4),
    },
    (EQB, "nyc"): {
        "outcome": dict(hidden=128, depth=1, epochs=500, lr=0.01),
        "baseline": dict(hidden=128, depth=1, epochs=1000, lr=1e-4),
        "policy": dict(hidden=10, depth=1, epochs=1000, lr=0.01),
    },
}
FAITHFUL_SETTINGS[(EQB, "ihdp")] = FAITHFUL_SETTINGS[(EQB, "nyc")]


@dataclass
class ExperimentConfig:
    """
    Everything a sweep needs apart from the dataset itself.

    seeds[0] also seeds phase I; each (epsilon, seed) phase-II run uses its own seed.
    """
    constraint: str = MODBRK
    epsilons: tuple = (0.0, 0.01, 0.1, 1.0, math.inf)
    seeds: tuple = (0, 1, 2)
    data_source: str = "nyc"
    data_path: str = None
    outcome: TrainConfig = field(default_factory=TrainConfig)
    baseline: TrainConfig = field(default_factory=TrainConfig)
    policy: TrainConfig = field(default_factory=TrainConfig)
    lagrangian: LagrangianState = field(default_factory=LagrangianState)
    clip_binning: ClipBinning = field(default_factory=ClipBinning)
    eta: float = 1.0
    anchor_action: float = 0.0
    grid_points: int = 41
    ipw_clamp: float = None
    holdout: float = 0.2
    const_levels: tuple = (0.25, 0.5, 0.75)
    histogram_bins: int = 20

    def __post_init__(self):
        if self.constraint not in CONSTRAINT_KINDS:
            raise ContractError(f"unknown constraint '{self.constraint}'")
        self.epsilons = tuple(float(e) for e in self.epsilons)
        self.seeds = tuple(int(s) for s in self.seeds)
        if any(not e >= 0 for e in self.epsilons) or not self.epsilons:
            raise ContractError("epsilon values must be >= 0 and nonempty")
        if not self.seeds:
            raise ContractError("at least one seed is required")
        if not 0.0 <= self.holdout < 1.0:
            raise ContractError("holdout must lie in [0, 1)")
        if int(self.grid_points) < 2:
            raise ContractError("grid_points must be >= 2")
        if self.ipw_clamp is not None and not self.ipw_clamp > 0:
            raise ContractError("ipw_clamp must be > 0")


def _scaled(settings, faithful, seed):
    settings = dict(settings)
    if not faithful:
        settings["epochs"] = max(1, settings["epochs"] // DESK_EPOCH_DIVISOR)
        settings["lr"] = max(settings["lr"], DESK_MIN_LR)
    return TrainConfig(seed=seed, **settings)


def default_experiment(constraint=MODBRK, data_source="nyc", faithful=False, **overrides):
    """
    Experiment defaults for a constraint and data source.

    Desk scale divides every epoch count by 10 and raises learning rates
    below 1e-3 to 1e-3; faithful keeps the full settings.
    """
    key = (constraint, "ihdp" if data_source == "ihdp" else "nyc")
    if key not in FAITHFUL_SETTINGS:
        raise ContractError(f"no defaults for {key}")
    settings = FAITHFUL_SETTINGS[key]
    seed = int(overrides.get("seeds", (0,))[0])
    cfgs = {name: _scaled(values, faithful, seed) for name, values in settings.items()}
    cfgs.setdefault("baseline", cfgs["outcome"])
    return ExperimentConfig(constraint=constraint, data_source=data_source, **cfgs, **overrides)


def config_to_dict(config):
    data = asdict(config)
    data["lagrangian"]["lambdas"] = {f"{a}-{b}": v for (a, b), v in config.lagrangian.lambdas.items()}
    return data


def config_hash(config):
    """SHA-256 of the canonical JSON form of the config."""
    text = json.dumps(config_to_dict(config), sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()


@dataclass(frozen=True)
class FrontierRow:
    epsilon: float
    seed: int
    utility: float
    utility_s0: float
    utility_s1: float
    constraint: float
    constraint_true: float = None

    def __post_init__(self):
        if not self.constraint >= 0 or (self.constraint_true is not None and not self.constraint_true >= 0):
            raise ContractError("constraint values must be >= 0")


@dataclass(frozen=True)
class BaselineResult:
    name: str
    utility: float
    utility_s0: float
    utility_s1: float
    constraint: float
    constraint_true: float = None
    level: float = None

    def __post_init__(self):
        if self.name not in BASELINE_NAMES:
            raise ContractError(f"unknown baseline '{self.name}'")
        if (self.name == "const_a") != (self.level is not None):
            raise ContractError("const_a baselines need a level and only they have one")


@dataclass
class Phase1Result:
    constraint: str
    outcome: object
    baseline_net: object = None
    variances: object = None
    diagnostics: dict = field(default_factory=dict)

    def fingerprints(self):
        prints = {"outcome": self.outcome.fingerprint()}
        if self.baseline_net is not None:
            prints["baseline"] = self.baseline_net.fingerprint()
        return prints


@dataclass
class RunResult:
    policy: PolicySpec
    row: FrontierRow
    metrics: list
    actions: np.ndarray


@dataclass
class SweepResult:
    rows: list
    failures: list = field(default_factory=list)
    runs: dict = field(default_factory=dict)

    def frame(self):
        return frontier_frame(self.rows)


# ---------------------------------------------------------------------------
# Phase I
# ---------------------------------------------------------------------------

def _split(n, holdout, seed):
    if holdout <= 0 or n < 10:
        idx = np.arange(n)
        return idx, idx
    order = np.random.default_rng(seed).permutation(n)
    n_hold = max(1, int(round(holdout * n)))
    return np.sort(order[n_hold:]), np.sort(order[:n_hold])


def constant_action_check(outcome, dataset, levels=(0.0, 0.5, 1.0), truth=None):
    """Mean predicted outcome at constant actions, next to the true mean when known."""
    rows = []
    for level in levels:
        row = {"action": float(level), "predicted": float(np.mean(outcome.predict(level, dataset.s, dataset.X)))}
        if truth is not None:
            row["true"] = float(np.mean(truth.structural_mean(dataset.s, dataset.X, level)))
        rows.append(row)
    return rows


def phase1_train(dataset, config, truth=None):
    """
    Fit the phase-I models.

    ModBrk fits a StructuredOutcomeNet on (a, s, x) -> y. EqB fits a plain
    outcome MLP, the baseline policy net (s, x) -> a and the residual
    variances vA and vY.

    Args:
        dataset (Dataset): Observed rows.
        config (ExperimentConfig): Training settings.
        truth (GroundTruth): Optional; enables the constant-action comparison.

    Returns:
        Phase1Result: Frozen models plus holdout diagnostics.

    Raises:
        TrainingError: When any fit diverges; the loss trace is attached.
    """
    seed = config.seeds[0]
    train, hold = _split(len(dataset), config.holdout, seed)
    s, X, a, y = dataset.s, dataset.X, dataset.a, dataset.y
    diagnostics = {"train_rows": int(train.size), "holdout_rows": int(hold.size)}

    if config.constraint == MODBRK:
        ocfg = config.outcome
        outcome = structured_init(ocfg.seed, dataset.d, hidden=ocfg.hidden, depth=ocfg.depth)
        outcome, trace = fit_structured(outcome, a[train], s[train], X[train], y[train], ocfg,
                                        anchor_action=config.anchor_action)
    else:
        ocfg = config.outcome
        net = net_init(ocfg.seed, ocfg.widths(2 + dataset.d))
        net, trace = fit_regression(net, stack_inputs(a[train], s[train], X[train]), y[train], ocfg)
        outcome = MLPOutcomeNet(net)
    diagnostics["outcome_loss"] = trace
    pred = outcome.predict(a[hold], s[hold], X[hold])
    diagnostics["outcome_r2"] = r2_score(y[hold], pred)
    diagnostics["outcome_explained_variance"] = explained_variance(y[hold], pred)
    diagnostics["constant_action"] = constant_action_check(outcome, dataset, truth=truth)
    logging.info(f"Phase I outcome model: holdout R2 {diagnostics['outcome_r2']:.4f}")

    result = Phase1Result(config.constraint, outcome, diagnostics=diagnostics)
    if config.constraint == EQB:
        bcfg = config.baseline
        base = net_init(bcfg.seed + 1, bcfg.widths(1 + dataset.d))
        base, btrace = fit_regression(base, stack_inputs(s[train], X[train]), a[train], bcfg)
        a_pred = net_forward(base, stack_inputs(s, X))[:, 0]
        diagnostics["baseline_loss"] = btrace
        diagnostics["baseline_r2"] = r2_score(a[hold], a_pred[hold])
        diagnostics["baseline_explained_variance"] = explained_variance(a[hold], a_pred[hold])
        result.baseline_net = base
        result.variances = estimate_variances(a[train] - a_pred[train],
                                              y[train] - outcome.predict(a[train], s[train], X[train]))
        logging.info(f"Phase I baseline policy: holdout R2 {diagnostics['baseline_r2']:.4f}, "
                     f"vA={result.variances.vA:.4g}, vY={result.variances.vY:.4g}")
    return result


# ---------------------------------------------------------------------------
# Phase II
# ---------------------------------------------------------------------------

def _check_finite(loss, grads, trace, label, step):
    trace.append(float(loss))
    if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
        raise TrainingError(f"{label}: non-finite loss at step {step}", trace)


def _assert_frozen(phase1, before):
    if phase1.fingerprints() != before:
        raise TrainingError("phase-I parameters changed during phase II")


def phase2_modbrk(phase1, dataset, epsilon, config, seed=0, clip=None, drop_s=False, truth=None):
    """
    Train a clipped deterministic policy under the ModBrk constraint.

    Minimizes -plugin_utility + phi(modbrk - epsilon) with full-batch Adam;
    the multipliers are updated every `lagrangian.update_period` steps.

    Args:
        phase1 (Phase1Result): Frozen ModBrk phase-I models.
        dataset (Dataset): Training rows.
        epsilon (float): Slack; math.inf disables the constraint.
        config (ExperimentConfig): Policy and Lagrangian settings.
        seed (int): Policy initialization seed.
        clip (ClipTable): Clipping intervals; built from the data when None.
        drop_s (bool): Hide s from the policy net.
        truth (GroundTruth): Optional; fills constraint_true.

    Returns:
        RunResult: Policy, frontier row, metrics rows and final actions.
    """
    if phase1.constraint != MODBRK:
        raise ContractError("phase2_modbrk needs ModBrk phase-I models")
    outcome = phase1.outcome
    before = phase1.fingerprints()
    clip = clip or clip_interval(dataset, config.clip_binning, config.eta)
    pcfg = config.policy
    policy = PolicySpec(DETERMINISTIC, net_init(seed, pcfg.widths(1 + dataset.d)), clipping=clip, drop_s=drop_s)
    state = replace(config.lagrangian, slack=epsilon)
    opt = OptimizerState(lr=pcfg.lr)
    params = policy.net.params()
    s, X = dataset.s, dataset.X
    metrics, trace = [], []
    label = f"modbrk eps={epsilon} seed={seed}"

    for step in range(int(pcfg.epochs)):
        actions, cache = policy.forward(s, X)
        utility, d_util = plugin_utility_and_grad(outcome, actions, s, X)
        value, d_value = modbrk_value_and_grad(outcome, actions, s, X)
        loss = augmented_objective(utility.overall, value, state)
        slope = augmented_slopes(value, state)[(0, 1)]
        grads = policy.backward(cache, -d_util + slope * d_value)
        _check_finite(loss, grads, trace, label, step)
        adam_step(params, grads, opt)
        if (step + 1) % state.update_period == 0:
            state = schedule_step(state, value)
            metrics.append(metrics_row(step + 1, state, value))

    _assert_frozen(phase1, before)
    utility = plugin_utility(outcome, policy, dataset)
    value = modbrk_value(outcome, policy, dataset)
    actions = policy.actions(s, X)
    constraint_true = ground_truth_constraint(truth, policy, None, MODBRK, dataset) if truth is not None else None
    row = FrontierRow(epsilon, seed, utility.overall, utility[0], utility[1], value.max(), constraint_true)
    logging.info(f"{label}: utility {row.utility:.4f}, constraint {row.constraint:.4g}")
    return RunResult(policy, row, metrics, actions)


def eqb_reference(phase1, dataset):
    """Baseline mean actions and MAP baseline outcome means per row."""
    s, X = dataset.s, dataset.X
    mu_base_action = net_forward(phase1.baseline_net, stack_inputs(s, X))[:, 0]
    mu_base = map_baseline_outcome(phase1.outcome, phase1.baseline_net, s, X)
    return mu_base_action, mu_base


def phase2_eqb(phase1, dataset, epsilon, config, seed=0, drop_s=False, truth=None):
    """
    Train a Gaussian-mean policy under the EqB constraint.

    The policy net starts as a copy of the baseline net, so the initial
    constraint is 0 and the initial IPW utility is mean(y). The bound grid
    is fixed from that initial policy. Per row, mu^Y_sigma is the outcome
    model at the policy mean and mu^Y_base its MAP baseline counterpart.

    Returns:
        RunResult: Policy, frontier row, metrics rows and final mean actions.

    Raises:
        TrainingError: Divergence or no usable IPW rows.
    """
    if phase1.constraint != EQB or phase1.baseline_net is None:
        raise ContractError("phase2_eqb needs EqB phase-I models")
    outcome = phase1.outcome
    vA, vY = phase1.variances.vA, phase1.variances.vY
    before = phase1.fingerprints()
    s, X, a, y = dataset.s, dataset.X, dataset.a, dataset.y
    mu_base_action, mu_base = eqb_reference(phase1, dataset)

    policy = PolicySpec(GAUSSIAN_MEAN, phase1.baseline_net.copy(), action_variance=vA, drop_s=drop_s)
    grid = default_grid(outcome.predict(policy.actions(s, X), s, X) - mu_base, vY, config.grid_points)
    state = replace(config.lagrangian, slack=epsilon)
    opt = OptimizerState(lr=config.policy.lr)
    params = policy.net.params()
    metrics, trace = [], []
    label = f"eqb eps={epsilon} seed={seed}"

    def evaluate(actions):
        try:
            ipw, d_ipw = ipw_utility_and_grad(s, a, y, actions, mu_base_action, vA, config.ipw_clamp)
        except ContractError as e:
            raise TrainingError(f"{label}: {e}", trace) from e
        mu_sigma = outcome.predict(actions, s, X)
        value, _, d_mu = eqb_value_and_grad(s, mu_sigma, mu_base, vY, grid)
        return ipw, d_ipw, value, d_mu

    for step in range(int(config.policy.epochs)):
        actions, cache = policy.forward(s, X)
        ipw, d_ipw, value, d_mu = evaluate(actions)
        loss = augmented_objective(ipw.overall, value, state)
        slope = augmented_slopes(value, state)[(0, 1)]
        d_actions = -d_ipw + slope * d_mu * outcome.action_gradient(actions, s, X)
        grads = policy.backward(cache, d_actions)
        _check_finite(loss, grads, trace, label, step)
        adam_step(params, grads, opt)
        if (step + 1) % state.update_period == 0:
            state = schedule_step(state, value)
            metrics.append(metrics_row(step + 1, state, value))

    _assert_frozen(phase1, before)
    actions = policy.actions(s, X)
    ipw, _, value, _ = evaluate(actions)
    constraint_true = None
    if truth is not None:
        base_policy = PolicySpec(GAUSSIAN_MEAN, phase1.baseline_net, action_variance=vA)
        constraint_true = ground_truth_constraint(truth, policy, base_policy, EQB, dataset, seed=seed)
    row = FrontierRow(epsilon, seed, ipw.overall, ipw[0], ipw[1], value.max(), constraint_true)
    logging.info(f"{label}: utility {row.utility:.4f}, constraint {row.constraint:.4g}")
    return RunResult(policy, row, metrics, actions)


def phase2(phase1, dataset, epsilon, config, seed=0, drop_s=False, truth=None, clip=None):
    if config.constraint == MODBRK:
        return phase2_modbrk(phase1, dataset, epsilon, config, seed, clip, drop_s, truth)
    return phase2_eqb(phase1, dataset, epsilon, config, seed, drop_s, truth)


# ---------------------------------------------------------------------------
# Ground truth
# ---------------------------------------------------------------------------

def _policy_actions(policy, dataset):
    if hasattr(policy, "actions"):
        return policy.actions(dataset.s, dataset.X)
    return np.asarray(policy, dtype=float)


def ground_truth_constraint(gt, policy, baseline_policy, kind, dataset, seed=0):
    """
    Constraint value under the generator's true outcome model.

    ModBrk: squared gap of group means of the true g-component at the
    policy's actions. EqB: paired draws (Y_sigma, Y_base) per row sharing the
    action and outcome noise, then the two-sample Kolmogorov-Smirnov
    statistic between the s=0 and s=1 samples of Y_sigma - Y_base.

    Args:
        gt (GroundTruth): Generator truth; None is a contract error.
        policy: PolicySpec or per-row actions.
        baseline_policy (PolicySpec): Gaussian-mean baseline (EqB only).
        kind (str): "modbrk" or "eqb".
        dataset (Dataset): Rows to evaluate on.
        seed (int): Noise seed for EqB draws.

    Returns:
        float: The ground-truth constraint value.
    """
    if gt is None:
        raise ContractError("ground-truth constraints need generator-backed data")
    s, X = dataset.s, dataset.X
    if kind == MODBRK:
        g = gt.g_component(s, X, _policy_actions(policy, dataset))
        return float((np.mean(g[s == 0]) - np.mean(g[s == 1])) ** 2)
    if kind != EQB:
        raise ContractError(f"unknown constraint '{kind}'")
    if baseline_policy is None:
        raise ContractError("EqB ground truth needs the baseline policy")

    rng = np.random.default_rng(seed)
    sd_a = math.sqrt(baseline_policy.action_variance)
    xi = rng.normal(0.0, 1.0, len(dataset)) * sd_a
    noise_y = rng.normal(0.0, 1.0, len(dataset)) * gt.spec.outcome_noise_sd
    y_sigma = gt.structural_mean(s, X, policy.actions(s, X) + xi) + noise_y
    y_base = gt.structural_mean(s, X, baseline_policy.actions(s, X) + xi) + noise_y
    diff = y_sigma - y_base
    return float(ks_2samp(diff[s == 0], diff[s == 1]).statistic)


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------

def _baseline_from_run(name, run):
    row = run.row
    return BaselineResult(name, row.utility, row.utility_s0, row.utility_s1, row.constraint, row.constraint_true)


def run_baselines(dataset, phase1, config, truth=None, seed=None):
    """
    Evaluate the comparison policies.

    unconstrained and drop_s are phase-II runs with epsilon = inf (drop_s
    zeroes s before the policy net). const_a levels use the plug-in utility
    and only exist for ModBrk. baseline_policy evaluates the observed actions.

    Returns:
        list: BaselineResult entries in a fixed order.
    """
    seed = config.seeds[0] if seed is None else seed
    results = [
        _baseline_from_run("unconstrained", phase2(phase1, dataset, math.inf, config, seed, truth=truth)),
        _baseline_from_run("drop_s", phase2(phase1, dataset, math.inf, config, seed, drop_s=True, truth=truth)),
    ]
    outcome = phase1.outcome
    if config.constraint == MODBRK:
        for level in config.const_levels:
            policy = PolicySpec(DETERMINISTIC, constant_action=float(level))
            util = plugin_utility(outcome, policy, dataset)
            value = modbrk_value(outcome, policy, dataset)
            true_value = ground_truth_constraint(truth, policy, None, MODBRK, dataset) if truth is not None else None
            results.append(BaselineResult("const_a", util.overall, util[0], util[1], value.max(), true_value,
                                          level=float(level)))
        pred = outcome.predict(dataset.a, dataset.s, dataset.X)
        util = UtilityEstimate(float(np.mean(pred)), {g: float(np.mean(pred[dataset.s == g])) for g in (0, 1)})
        value = modbrk_value(outcome, dataset.a, dataset)
        true_value = ground_truth_constraint(truth, dataset.a, None, MODBRK, dataset) if truth is not None else None
    else:
        util = UtilityEstimate(float(np.mean(dataset.y)),
                               {g: float(np.mean(dataset.y[dataset.s == g])) for g in (0, 1)})
        mu_base_action, mu_base = eqb_reference(phase1, dataset)
        grid = default_grid(np.zeros(1), phase1.variances.vY, config.grid_points)
        value, _, _ = eqb_value_and_grad(dataset.s, mu_base, mu_base, phase1.variances.vY, grid)
        true_value = None
        if truth is not None:
            base_policy = PolicySpec(GAUSSIAN_MEAN, phase1.baseline_net, action_variance=phase1.variances.vA)
            true_value = ground_truth_constraint(truth, base_policy, base_policy, EQB, dataset, seed=seed)
    results.append(BaselineResult("baseline_policy", util.overall, util[0], util[1], value.max(), true_value))
    return results


def baselines_frame(results):
    frame = pd.DataFrame([{"name": r.name, "level": r.level, "utility": r.utility, "utility_s0": r.utility_s0,
                          "utility_s1": r.utility_s1, "constraint": r.constraint,
                          "constraint_true": r.constraint_true} for r in results], columns=BASELINE_COLUMNS)
    return frame.astype({"level": float, "constraint_true": float})


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

def action_histogram(actions, s, bins=20, value_range=None):
    """
    Recommended actions by group.

    Returns:
        pd.DataFrame: Columns bin_lo, bin_hi, count_s0, count_s1.
    """
    actions = np.asarray(actions, dtype=float)
    s = np.asarray(s)
    if value_range is None:
        value_range = (float(actions.min()), float(actions.max()))
    if not value_range[1] > value_range[0]:
        value_range = (value_range[0] - 0.5, value_range[0] + 0.5)
    edges = np.linspace(value_range[0], value_range[1], int(bins) + 1)
    counts = {grp: np.histogram(actions[s == grp], bins=edges)[0] for grp in (0, 1)}
    return pd.DataFrame({"bin_lo": edges[:-1], "bin_hi": edges[1:],
                         "count_s0": counts[0], "count_s1": counts[1]}, columns=HISTOGRAM_COLUMNS)


def frontier_frame(rows):
    return pd.DataFrame([{"epsilon": r.epsilon, "seed": r.seed, "utility": r.utility,
                          "utility_s0": r.utility_s0, "utility_s1": r.utility_s1,
                          "constraint": r.constraint, "constraint_true": r.constraint_true}
                         for r in rows], columns=FRONTIER_COLUMNS).astype({"constraint_true": float})


def _sweep_job(args):
    phase1, dataset, epsilon, config, seed, truth, clip = args
    run = phase2(phase1, dataset, epsilon, config, seed, truth=truth, clip=clip)
    # the policy net is not needed by the caller; keep the payload small
    return RunResult(None, run.row, run.metrics, run.actions)


def slack_sweep(config, dataset, phase1=None, truth=None, jobs=1, progress=True):
    """
    Fresh phase-II runs for every (epsilon, seed) from shared phase-I models.

    Individual run failures are logged and recorded; the sweep continues.

    Args:
        config (ExperimentConfig): Sweep settings.
        dataset (Dataset): Training rows.
        phase1 (Phase1Result): Shared phase-I models; trained here when None.
        truth (GroundTruth): Optional; fills constraint_true.
        jobs (int): Worker processes; 1 runs in-process.
        progress (bool): Show a tqdm progress bar.

    Returns:
        SweepResult: Rows sorted by (epsilon, seed), failures and per-run outputs.
    """
    phase1 = phase1 or phase1_train(dataset, config, truth)
    clip = clip_interval(dataset, config.clip_binning, config.eta) if config.constraint == MODBRK else None
    tasks = [(eps, seed) for eps in config.epsilons for seed in config.seeds]
    runs, failures = {}, []

    def record(key, outcome):
        if isinstance(outcome, Exception):
            logging.warning(f"Sweep run epsilon={key[0]} seed={key[1]} failed: {outcome}")
            failures.append({"epsilon": key[0], "seed": key[1], "error": str(outcome)})
        else:
            runs[key] = outcome

    bar = tqdm(total=len(tasks), desc=f"{config.constraint} sweep", disable=not progress)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(_sweep_job, (phase1, dataset, eps, config, seed, truth, clip)): (eps, seed)
                       for eps, seed in tasks}
            for future in as_completed(futures):
                try:
                    record(futures[future], future.result())
                except FairpolError as e:
                    record(futures[future], e)
                bar.update(1)
    else:
        for eps, seed in tasks:
            try:
                record((eps, seed), _sweep_job((phase1, dataset, eps, config, seed, truth, clip)))
            except FairpolError as e:
                record((eps, seed), e)
            bar.update(1)
    bar.close()

    keys = sorted(runs)
    failures.sort(key=lambda f: (f["epsilon"], f["seed"]))
    logging.info(f"Sweep finished: {len(keys)} runs, {len(failures)} failures")
    return SweepResult(rows=[runs[k].row for k in keys], failures=failures, runs={k: runs[k] for k in keys})


def run_metadata(config, generator_seed=None, dataset_path=None):
    """Metadata written next to sweep outputs."""
    meta = {
        "config_hash": config_hash(config),
        "constraint": config.constraint,
        "epsilons": [str(e) for e in config.epsilons],
        "seeds": list(config.seeds),
        "generator_seed": generator_seed,
        "dataset": str(dataset_path) if dataset_path is not None else None,
    }
    if config.constraint == EQB:
        meta["ground_truth_metric"] = "two-sample Kolmogorov-Smirnov statistic"
        meta["coupling"] = EQB_COUPLING
    return meta
