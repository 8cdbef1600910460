"""
-----------------------------------------------------------------
fairpol - outcome-disparity controlled policy learning
-----------------------------------------------------------------

Feedforward network stack.

This module provides small affine+rectifier networks with exact analytic
gradients, an adaptive-moment optimizer, the additive f/g/h outcome network
and the clipped policy head.

Key features:
- Initialize, evaluate and back-propagate through AffineNet stacks
- Gradients with respect to both parameters and inputs
- Adam updates with bias correction
- Full-batch or mini-batch regression training
- StructuredOutcomeNet: mu(a, s, x) = f(s, x) + g(a, s, x) + h(a, x)
- Versioned JSON serialization of trained nets

Usage:
- Use `net_init()` to create a network and `fit_regression()` to train it.
- Use `structured_init()` / `fit_structured()` for the decomposed outcome model.
- Use `clipped_forward()` / `clipped_backward()` inside policy training loops.
"""

import copy
import hashlib
import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import ContractError, TrainingError

IDENTITY = "identity"
SHIFTED_SIGMOID = "shifted_sigmoid"
RELU = "relu"

NET_FORMAT = "fairpol-net"
NET_FORMAT_VERSION = 1


@dataclass
class AffineNet:
    """
    Affine layers with rectifiers between them.

    weights[l] has shape (widths[l], widths[l + 1]) so a batch is evaluated as
    `h @ W + b`. The optional output transform is applied to the last layer:
    identity maps raw -> output_shift + output_scale * raw, the shifted
    sigmoid maps raw -> lo + (hi - lo) * sigmoid(raw).
    """
    widths: list
    weights: list
    biases: list
    output_transform: str = IDENTITY
    bounds: tuple = None
    output_shift: float = 0.0
    output_scale: float = 1.0
    hidden_activation: str = RELU

    @property
    def n_inputs(self):
        return self.widths[0]

    @property
    def n_outputs(self):
        return self.widths[-1]

    def params(self):
        """
        Expose the parameter arrays by name.

        Returns:
            dict: {"W0": ..., "b0": ..., "W1": ...}; the arrays are the live
            parameters, so in-place updates change the net.
        """
        out = {}
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            out[f"W{i}"] = W
            out[f"b{i}"] = b
        return out

    def parameter_count(self):
        return int(sum(W.size + b.size for W, b in zip(self.weights, self.biases)))

    def copy(self):
        return copy.deepcopy(self)

    def fingerprint(self):
        """SHA-256 over the raw parameter bytes, used to assert frozen nets."""
        digest = hashlib.sha256()
        for W, b in zip(self.weights, self.biases):
            digest.update(np.ascontiguousarray(W).tobytes())
            digest.update(np.ascontiguousarray(b).tobytes())
        digest.update(repr((self.output_shift, self.output_scale)).encode())
        return digest.hexdigest()


@dataclass
class OptimizerState:
    """Adam moment accumulators and step counter."""
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


@dataclass
class TrainConfig:
    """
    Training hyperparameters.

    batch_size 0 means a single full batch. depth counts hidden layers, so
    depth=2 gives three affine layers and two rectifiers.
    """
    epochs: int = 100
    lr: float = 1e-3
    hidden: int = 128
    depth: int = 1
    batch_size: int = 0
    seed: int = 0
    weight_decay: float = 0.0
    standardize_targets: bool = True
    anchor_weight: float = 0.0

    def __post_init__(self):
        if int(self.epochs) < 1:
            raise ContractError(f"epochs must be >= 1, got {self.epochs}")
        if not self.lr > 0:
            raise ContractError(f"learning rate must be > 0, got {self.lr}")
        if int(self.hidden) < 1 or int(self.depth) < 0:
            raise ContractError("hidden width must be >= 1 and depth >= 0")
        if int(self.batch_size) < 0:
            raise ContractError("batch_size must be >= 0")

    def widths(self, n_inputs, n_outputs=1):
        return [n_inputs] + [int(self.hidden)] * int(self.depth) + [n_outputs]


# ---------------------------------------------------------------------------
# Construction and evaluation
# ---------------------------------------------------------------------------

def net_init(seed, widths, output_transform=IDENTITY, bounds=None):
    """
    Create a network with uniform fan-in initialization.

    Weights and biases of layer l are drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).

    Args:
        seed (int): Seed for numpy's default_rng.
        widths (list): Layer widths, input first.
        output_transform (str): IDENTITY or SHIFTED_SIGMOID.
        bounds (tuple): (lo, hi) for the shifted sigmoid.

    Returns:
        AffineNet: The initialized network.
    """
    widths = [int(w) for w in widths]
    if len(widths) < 2 or any(w < 1 for w in widths):
        raise ContractError(f"invalid layer widths {widths}")
    if output_transform not in (IDENTITY, SHIFTED_SIGMOID):
        raise ContractError(f"unknown output transform '{output_transform}'")
    if output_transform == SHIFTED_SIGMOID:
        if bounds is None or not bounds[0] < bounds[1]:
            raise ContractError(f"shifted sigmoid needs bounds lo < hi, got {bounds}")
        bounds = (float(bounds[0]), float(bounds[1]))

    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        limit = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-limit, limit, size=fan_out))
    return AffineNet(widths=widths, weights=weights, biases=biases,
                     output_transform=output_transform, bounds=bounds)


def _as_batch(net, inputs):
    x = np.asarray(inputs, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.n_inputs:
        raise ContractError(f"expected inputs with {net.n_inputs} columns, got shape {np.shape(inputs)}")
    return x


def net_forward_cached(net, inputs):
    """
    Forward pass keeping the intermediates needed by `net_backward`.

    Args:
        net (AffineNet): The network.
        inputs (np.ndarray): Batch of shape (n, widths[0]).

    Returns:
        tuple: (outputs of shape (n, widths[-1]), cache)
    """
    x = _as_batch(net, inputs)
    activations = [x]
    preactivations = []
    h = x
    last = len(net.weights) - 1
    for layer, (W, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ W + b
        preactivations.append(z)
        if layer < last:
            h = np.maximum(z, 0.0)
            activations.append(h)
        else:
            h = z
    raw = h
    return _transform(net, raw), (activations, preactivations, raw)


def _transform(net, raw):
    if net.output_transform == SHIFTED_SIGMOID:
        lo, hi = net.bounds
        return lo + (hi - lo) * expit(raw)
    return net.output_shift + net.output_scale * raw


def net_forward(net, inputs):
    """
    Deterministic forward pass.

    Args:
        net (AffineNet): The network.
        inputs (np.ndarray): One input vector or a batch of rows.

    Returns:
        np.ndarray: Output vector (for a single input) or (n, out) batch.
    """
    single = np.ndim(inputs) == 1
    out, _ = net_forward_cached(net, inputs)
    return out[0] if single else out


def net_preactivation(net, inputs):
    """Raw last-layer output, before the output transform."""
    _, (_, _, raw) = net_forward_cached(net, inputs)
    return raw


def _backprop(net, cache, d_raw):
    activations, preactivations, _ = cache
    grads = {}
    d = d_raw
    d_input = None
    for layer in range(len(net.weights) - 1, -1, -1):
        grads[f"W{layer}"] = activations[layer].T @ d
        grads[f"b{layer}"] = d.sum(axis=0)
        d_input = d @ net.weights[layer].T
        if layer > 0:
            d = d_input * (preactivations[layer - 1] > 0.0)
    return grads, d_input


def net_backward(net, cache, d_out):
    """
    Back-propagate an upstream gradient through the network.

    Args:
        net (AffineNet): The network used for the cached forward pass.
        cache: Cache returned by `net_forward_cached`.
        d_out (np.ndarray): dLoss/dOutput, shape (n, widths[-1]).

    Returns:
        tuple: (parameter gradients dict, gradient w.r.t. inputs (n, widths[0]))
    """
    raw = cache[2]
    d_out = np.asarray(d_out, dtype=float).reshape(raw.shape)
    if net.output_transform == SHIFTED_SIGMOID:
        lo, hi = net.bounds
        sig = expit(raw)
        d_raw = d_out * (hi - lo) * sig * (1.0 - sig)
    else:
        d_raw = d_out * net.output_scale
    return _backprop(net, cache, d_raw)


def net_gradients(net, inputs, targets):
    """
    Mean-squared-error loss and its exact gradients.

    Args:
        net (AffineNet): The network.
        inputs (np.ndarray): Batch inputs (n, widths[0]).
        targets (np.ndarray): Batch targets (n,) or (n, widths[-1]).

    Returns:
        tuple: (gradients dict, loss value)
    """
    x = np.asarray(inputs, dtype=float)
    if x.ndim == 0 or x.shape[0] == 0:
        raise ContractError("empty batch")
    pred, cache = net_forward_cached(net, x)
    y = np.asarray(targets, dtype=float).reshape(pred.shape)
    resid = pred - y
    loss = float(np.mean(resid ** 2))
    grads, _ = net_backward(net, cache, 2.0 * resid / resid.size)
    return grads, loss


# ---------------------------------------------------------------------------
# Optimization
# ---------------------------------------------------------------------------

def adam_step(params, grads, state):
    """
    One bias-corrected Adam update, applied in place.

    Args:
        params (dict): Name -> parameter array (mutated).
        grads (dict): Name -> gradient array.
        state (OptimizerState): Moments and step counter (mutated).

    Returns:
        tuple: (params, state)
    """
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    step_size = state.lr / bc1

    for name, param in params.items():
        g = grads[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(param)
            state.v[name] = np.zeros_like(param)
        if state.m[name].shape != param.shape:
            raise ContractError(f"moment shape mismatch for {name}")

        state.m[name] *= state.beta1
        state.m[name] += (1.0 - state.beta1) * g
        state.v[name] *= state.beta2
        state.v[name] += (1.0 - state.beta2) * (g * g)

        denom = np.sqrt(state.v[name] / bc2) + state.epsilon
        param -= step_size * state.m[name] / denom
    return params, state


def _is_weight(name):
    return name.rsplit(".", 1)[-1].startswith("W")


def run_adam(params, grad_fn, n_rows, cfg, label="net"):
    """
    Generic epoch loop shared by the regression trainers.

    Args:
        params (dict): Live parameter arrays.
        grad_fn (callable): idx -> (grads, loss); idx is None for full batch.
        n_rows (int): Number of training rows.
        cfg (TrainConfig): Training settings.
        label (str): Name used in log lines and errors.

    Returns:
        list: Per-epoch mean loss.
    """
    rng = np.random.default_rng(cfg.seed)
    state = OptimizerState(lr=cfg.lr)
    batch = int(cfg.batch_size)
    trace = []

    for epoch in range(int(cfg.epochs)):
        if 0 < batch < n_rows:
            order = rng.permutation(n_rows)
            batches = [order[i:i + batch] for i in range(0, n_rows, batch)]
        else:
            batches = [None]

        total = 0.0
        for idx in batches:
            grads, loss = grad_fn(idx)
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                trace.append(float(loss))
                raise TrainingError(f"{label}: non-finite loss at epoch {epoch}", trace)
            if cfg.weight_decay:
                grads = {k: (g + cfg.weight_decay * params[k]) if _is_weight(k) else g
                         for k, g in grads.items()}
            adam_step(params, grads, state)
            total += loss * (n_rows if idx is None else len(idx))
        trace.append(total / n_rows)

        if epoch % max(1, int(cfg.epochs) // 10) == 0:
            logging.debug(f"{label}: epoch {epoch} loss {trace[-1]:.6g}")

    logging.info(f"{label}: trained {cfg.epochs} epochs, final loss {trace[-1]:.6g}")
    return trace


def fit_regression(net, inputs, targets, cfg):
    """
    Fit a network to (inputs, targets) under mean squared error.

    When cfg.standardize_targets is set, the identity output transform is
    re-anchored on the target mean and standard deviation before training.

    Args:
        net (AffineNet): Network to train (mutated in place).
        inputs (np.ndarray): (n, widths[0]) inputs.
        targets (np.ndarray): (n,) targets.
        cfg (TrainConfig): Training settings.

    Returns:
        tuple: (trained net, loss trace)
    """
    x = _as_batch(net, inputs)
    y = np.asarray(targets, dtype=float).reshape(x.shape[0], -1)
    if x.shape[0] == 0:
        raise ContractError("empty training set")

    if cfg.standardize_targets and net.output_transform == IDENTITY:
        scale = float(np.std(y))
        net.output_shift = float(np.mean(y))
        net.output_scale = scale if scale > 0 else 1.0

    def grad_fn(idx):
        if idx is None:
            return net_gradients(net, x, y)
        return net_gradients(net, x[idx], y[idx])

    trace = run_adam(net.params(), grad_fn, x.shape[0], cfg, label="regression")
    return net, trace


def r2_score(targets, predictions):
    y = np.asarray(targets, dtype=float).ravel()
    p = np.asarray(predictions, dtype=float).ravel()
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0:
        return 0.0
    return 1.0 - float(np.sum((y - p) ** 2)) / ss_tot


def explained_variance(targets, predictions):
    y = np.asarray(targets, dtype=float).ravel()
    p = np.asarray(predictions, dtype=float).ravel()
    var_y = float(np.var(y))
    return 0.0 if var_y == 0 else 1.0 - float(np.var(y - p)) / var_y


# ---------------------------------------------------------------------------
# Outcome models
# ---------------------------------------------------------------------------

def stack_inputs(*columns):
    """Column-stack scalars, 1-D arrays and 2-D blocks into a batch."""
    parts = []
    n = None
    for col in columns:
        arr = np.asarray(col, dtype=float)
        if arr.ndim == 2:
            n = arr.shape[0]
    for col in columns:
        arr = np.asarray(col, dtype=float)
        if arr.ndim == 0:
            arr = np.full((n or 1, 1), float(arr))
        elif arr.ndim == 1:
            arr = arr[:, None]
        parts.append(arr)
    return np.hstack(parts)


@dataclass
class MLPOutcomeNet:
    """Plain outcome regression mu^Y(a, s, x) on inputs [a, s, x]."""
    net: AffineNet

    def predict(self, a, s, X):
        return net_forward(self.net, stack_inputs(a, s, np.atleast_2d(X)))[:, 0]

    def action_gradient(self, a, s, X):
        """d mu^Y / d a per row."""
        out, cache = net_forward_cached(self.net, stack_inputs(a, s, np.atleast_2d(X)))
        _, d_in = net_backward(self.net, cache, np.ones_like(out))
        return d_in[:, 0]

    def fingerprint(self):
        return self.net.fingerprint()


@dataclass
class StructuredOutcomeNet:
    """
    mu^Y(a, s, x) = f(s, x) + g(a, s, x) + h(a, x).

    f_net sees [s, x], g_net sees [a, s, x], h_net sees [a, x]. The output
    affine map is shared: f carries the shift, every component the scale.
    """
    f_net: AffineNet
    g_net: AffineNet
    h_net: AffineNet
    output_shift: float = 0.0
    output_scale: float = 1.0

    @property
    def n_covariates(self):
        return self.h_net.n_inputs - 1

    def params(self):
        out = {}
        for prefix, sub in (("f", self.f_net), ("g", self.g_net), ("h", self.h_net)):
            for name, arr in sub.params().items():
                out[f"{prefix}.{name}"] = arr
        return out

    def predict(self, a, s, X):
        return structured_forward(self, a, s, X)[3]

    def g_values(self, a, s, X):
        a, s, X = _check_structured_arity(self, a, s, X)
        return self.output_scale * net_forward(self.g_net, stack_inputs(a, s, X))[:, 0]

    def g_action_gradient(self, a, s, X):
        a, s, X = _check_structured_arity(self, a, s, X)
        out, cache = net_forward_cached(self.g_net, stack_inputs(a, s, X))
        _, d_in = net_backward(self.g_net, cache, np.ones_like(out))
        return self.output_scale * d_in[:, 0]

    def action_gradient(self, a, s, X):
        a, s, X = _check_structured_arity(self, a, s, X)
        out, cache = net_forward_cached(self.h_net, stack_inputs(a, X))
        _, d_h = net_backward(self.h_net, cache, np.ones_like(out))
        return self.g_action_gradient(a, s, X) + self.output_scale * d_h[:, 0]

    def fingerprint(self):
        digest = hashlib.sha256()
        for sub in (self.f_net, self.g_net, self.h_net):
            digest.update(sub.fingerprint().encode())
        digest.update(repr((self.output_shift, self.output_scale)).encode())
        return digest.hexdigest()

    def copy(self):
        return copy.deepcopy(self)


def structured_init(seed, n_covariates, hidden=256, depth=2):
    """
    Create a StructuredOutcomeNet with three independently seeded subnets.

    Args:
        seed (int): Base seed; the subnets use seed, seed+1 and seed+2.
        n_covariates (int): Covariate dimension d.
        hidden (int): Hidden width of every subnet.
        depth (int): Hidden layers per subnet.
    """
    def widths(n_in):
        return [n_in] + [hidden] * depth + [1]

    d = int(n_covariates)
    return StructuredOutcomeNet(
        f_net=net_init(seed, widths(1 + d)),
        g_net=net_init(seed + 1, widths(2 + d)),
        h_net=net_init(seed + 2, widths(1 + d)),
    )


def _check_structured_arity(net, a, s, X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != net.n_covariates:
        raise ContractError(f"expected {net.n_covariates} covariates, got {X.shape[1]}")
    n = X.shape[0]
    a = np.broadcast_to(np.asarray(a, dtype=float), (n,))
    s = np.broadcast_to(np.asarray(s, dtype=float), (n,))
    return a, s, X


def structured_forward(net, a, s, X):
    """
    Evaluate the three components and their sum.

    Args:
        net (StructuredOutcomeNet): The outcome model.
        a, s: Actions and group labels (scalars or length-n arrays).
        X (np.ndarray): Covariates (d,) or (n, d).

    Returns:
        tuple: (f_val, g_val, h_val, total), each of length n; total is
        exactly f_val + g_val + h_val.
    """
    a, s, X = _check_structured_arity(net, a, s, X)
    f_val = net.output_shift + net.output_scale * net_forward(net.f_net, stack_inputs(s, X))[:, 0]
    g_val = net.output_scale * net_forward(net.g_net, stack_inputs(a, s, X))[:, 0]
    h_val = net.output_scale * net_forward(net.h_net, stack_inputs(a, X))[:, 0]
    return f_val, g_val, h_val, f_val + g_val + h_val


def structured_gradients(net, a, s, X, y, anchor_action=None, anchor_weight=0.0):
    """
    MSE gradients for all three subnets, plus the optional g anchoring penalty.

    The anchoring term anchor_weight * mean_i g(a_ref, s_i, x_i)^2 pins g to
    zero at the reference action, so g only carries action-dependent effects.
    """
    a, s, X = _check_structured_arity(net, a, s, X)
    y = np.asarray(y, dtype=float).ravel()
    n = X.shape[0]
    if n == 0:
        raise ContractError("empty batch")

    f_out, f_cache = net_forward_cached(net.f_net, stack_inputs(s, X))
    g_out, g_cache = net_forward_cached(net.g_net, stack_inputs(a, s, X))
    h_out, h_cache = net_forward_cached(net.h_net, stack_inputs(a, X))
    pred = net.output_shift + net.output_scale * (f_out + g_out + h_out)[:, 0]
    resid = pred - y
    loss = float(np.mean(resid ** 2))
    d = (2.0 * resid / n * net.output_scale)[:, None]

    grads = {}
    for prefix, sub, cache in (("f", net.f_net, f_cache), ("g", net.g_net, g_cache), ("h", net.h_net, h_cache)):
        sub_grads, _ = net_backward(sub, cache, d)
        for name, g in sub_grads.items():
            grads[f"{prefix}.{name}"] = g

    if anchor_weight > 0 and anchor_action is not None:
        a_ref = np.full(n, float(anchor_action))
        g_ref, ref_cache = net_forward_cached(net.g_net, stack_inputs(a_ref, s, X))
        g_ref = net.output_scale * g_ref
        loss += anchor_weight * float(np.mean(g_ref ** 2))
        d_ref = 2.0 * anchor_weight * g_ref * net.output_scale / n
        ref_grads, _ = net_backward(net.g_net, ref_cache, d_ref)
        for name, g in ref_grads.items():
            grads[f"g.{name}"] = grads[f"g.{name}"] + g
    return grads, loss


def fit_structured(net, a, s, X, y, cfg, anchor_action=None):
    """
    Phase-I fit of the structured outcome model.

    Args:
        net (StructuredOutcomeNet): Model to train (mutated in place).
        a, s, X, y: Training data columns.
        cfg (TrainConfig): Training settings; cfg.anchor_weight enables the
            identifiability penalty at anchor_action.
        anchor_action (float): Reference action, normally the mean action.

    Returns:
        tuple: (trained net, loss trace)
    """
    a, s, X = _check_structured_arity(net, a, s, X)
    y = np.asarray(y, dtype=float).ravel()
    if cfg.standardize_targets:
        scale = float(np.std(y))
        net.output_shift = float(np.mean(y))
        net.output_scale = scale if scale > 0 else 1.0

    def grad_fn(idx):
        if idx is None:
            return structured_gradients(net, a, s, X, y, anchor_action, cfg.anchor_weight)
        return structured_gradients(net, a[idx], s[idx], X[idx], y[idx], anchor_action, cfg.anchor_weight)

    trace = run_adam(net.params(), grad_fn, X.shape[0], cfg, label="structured outcome")
    return net, trace


# ---------------------------------------------------------------------------
# Clipped policy head
# ---------------------------------------------------------------------------

def _check_interval(lo, hi):
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(~(lo < hi)):
        raise ContractError("clip interval needs lo < hi")
    return lo, hi


def clipped_forward(net, inputs, lo, hi):
    """
    Policy actions lo + (hi - lo) * sigmoid(raw) with a cache for backprop.

    Args:
        net (AffineNet): Policy network; its own output transform is bypassed.
        inputs (np.ndarray): (n, widths[0]) batch of [s, x] rows.
        lo, hi: Interval bounds, scalars or length-n arrays.

    Returns:
        tuple: (actions of length n, cache)
    """
    lo, hi = _check_interval(lo, hi)
    _, cache = net_forward_cached(net, inputs)
    raw = cache[2][:, 0]
    sig = expit(raw)
    actions = lo + (hi - lo) * sig
    return actions, (cache, sig, hi - lo)


def clipped_backward(net, clip_cache, d_actions):
    """Parameter gradients of a clipped policy given dLoss/dAction per row."""
    cache, sig, width = clip_cache
    d_raw = (np.asarray(d_actions, dtype=float) * width * sig * (1.0 - sig))[:, None]
    grads, _ = _backprop(net, cache, d_raw)
    return grads


def policy_forward_clipped(net, s, x, interval):
    """
    Single-row clipped policy action.

    Args:
        net (AffineNet): Policy network over [s, x].
        s (int): Group label.
        x (np.ndarray): Covariate vector.
        interval (tuple): (lo, hi) with lo < hi.

    Returns:
        float: The action, inside (lo, hi) for finite pre-activations.
    """
    lo, hi = interval
    if not lo < hi:
        raise ContractError(f"clip interval needs lo < hi, got [{lo}, {hi}]")
    actions, _ = clipped_forward(net, stack_inputs(np.atleast_1d(float(s)), np.atleast_2d(x)), lo, hi)
    return float(actions[0])


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _affine_to_dict(net):
    return {
        "widths": list(net.widths),
        "output_transform": net.output_transform,
        "bounds": list(net.bounds) if net.bounds is not None else None,
        "output_shift": net.output_shift,
        "output_scale": net.output_scale,
        "hidden_activation": net.hidden_activation,
        "params": [np.concatenate([W.ravel(), b.ravel()]).tolist()
                   for W, b in zip(net.weights, net.biases)],
    }


def _affine_from_dict(data):
    widths = [int(w) for w in data["widths"]]
    weights, biases = [], []
    for layer, flat in enumerate(data["params"]):
        n_in, n_out = widths[layer], widths[layer + 1]
        flat = np.asarray(flat, dtype=float)
        if flat.size != n_in * n_out + n_out:
            raise ContractError(f"layer {layer}: expected {n_in * n_out + n_out} values, got {flat.size}")
        weights.append(flat[:n_in * n_out].reshape(n_in, n_out).copy())
        biases.append(flat[n_in * n_out:].copy())
    bounds = tuple(data["bounds"]) if data.get("bounds") is not None else None
    return AffineNet(widths=widths, weights=weights, biases=biases,
                     output_transform=data.get("output_transform", IDENTITY), bounds=bounds,
                     output_shift=float(data.get("output_shift", 0.0)),
                     output_scale=float(data.get("output_scale", 1.0)),
                     hidden_activation=data.get("hidden_activation", RELU))


def net_to_dict(model):
    """Serializable dict for an AffineNet, MLPOutcomeNet or StructuredOutcomeNet."""
    header = {"format": NET_FORMAT, "version": NET_FORMAT_VERSION}
    if isinstance(model, StructuredOutcomeNet):
        return {**header, "kind": "structured",
                "output_shift": model.output_shift, "output_scale": model.output_scale,
                "f": _affine_to_dict(model.f_net), "g": _affine_to_dict(model.g_net),
                "h": _affine_to_dict(model.h_net)}
    if isinstance(model, MLPOutcomeNet):
        return {**header, "kind": "mlp_outcome", "net": _affine_to_dict(model.net)}
    return {**header, "kind": "affine", "net": _affine_to_dict(model)}


def net_from_dict(data):
    if data.get("format") != NET_FORMAT:
        raise ContractError("not a fairpol net file")
    if int(data.get("version", 0)) != NET_FORMAT_VERSION:
        raise ContractError(f"unsupported net format version {data.get('version')}")
    kind = data.get("kind")
    if kind == "structured":
        return StructuredOutcomeNet(
            f_net=_affine_from_dict(data["f"]), g_net=_affine_from_dict(data["g"]),
            h_net=_affine_from_dict(data["h"]),
            output_shift=float(data["output_shift"]), output_scale=float(data["output_scale"]))
    if kind == "mlp_outcome":
        return MLPOutcomeNet(_affine_from_dict(data["net"]))
    if kind == "affine":
        return _affine_from_dict(data["net"])
    raise ContractError(f"unknown net kind '{kind}'")


def save_net(model, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(net_to_dict(model), f, indent=1)
    logging.info(f"Saved net to {path}")


def load_net(path):
    with open(path, "r", encoding="utf-8") as f:
        return net_from_dict(json.load(f))
