import numpy as np
import pytest

from fairpol.errors import ContractError, TrainingError
from fairpol.nnet import (SHIFTED_SIGMOID, MLPOutcomeNet, OptimizerState, TrainConfig, adam_step, clipped_backward,
                          clipped_forward, fit_regression, fit_structured, load_net, net_backward,
                          net_forward, net_forward_cached, net_gradients, net_init, policy_forward_clipped,
                          r2_score, run_adam, save_net, stack_inputs, structured_forward, structured_gradients,
                          structured_init)


def rel_error(analytic, numeric):
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    return float(np.max(np.abs(analytic - numeric) / np.maximum(1e-5, np.abs(analytic) + np.abs(numeric))))


def numeric_grad(loss_fn, param, h=1e-6):
    grad = np.zeros_like(param)
    for idx in np.ndindex(param.shape):
        old = param[idx]
        param[idx] = old + h
        up = loss_fn()
        param[idx] = old - h
        down = loss_fn()
        param[idx] = old
        grad[idx] = (up - down) / (2 * h)
    return grad


def test_net_init_is_deterministic():
    a = net_init(7, [3, 5, 1])
    b = net_init(7, [3, 5, 1])
    c = net_init(8, [3, 5, 1])
    assert a.fingerprint() == b.fingerprint()
    assert a.fingerprint() != c.fingerprint()
    assert a.parameter_count() == 3 * 5 + 5 + 5 + 1


def test_net_init_rejects_bad_layouts():
    with pytest.raises(ContractError):
        net_init(0, [3])
    with pytest.raises(ContractError):
        net_init(0, [3, 1], output_transform=SHIFTED_SIGMOID, bounds=(1.0, 1.0))


def test_forward_rejects_wrong_arity():
    net = net_init(0, [3, 4, 1])
    with pytest.raises(ContractError):
        net_forward(net, np.zeros((2, 4)))


def test_mse_gradients_match_finite_differences_on_random_configs():
    rng = np.random.default_rng(0)
    worst = 0.0
    for trial in range(100):
        n_in = int(rng.integers(1, 5))
        widths = [n_in] + [int(w) for w in rng.integers(1, 6, size=int(rng.integers(0, 3)))] + [1]
        net = net_init(trial, widths)
        net.output_scale = float(rng.uniform(0.5, 2.0))
        x = rng.normal(size=(6, n_in))
        y = rng.normal(size=6)
        grads, _ = net_gradients(net, x, y)
        for name, param in net.params().items():
            num = numeric_grad(lambda: net_gradients(net, x, y)[1], param)
            worst = max(worst, rel_error(grads[name], num))
    assert worst < 1e-4


def test_sigmoid_output_backward_matches_finite_differences():
    rng = np.random.default_rng(1)
    net = net_init(3, [2, 6, 1], output_transform=SHIFTED_SIGMOID, bounds=(-1.0, 2.0))
    x = rng.normal(size=(5, 2))
    weights = rng.normal(size=5)

    def loss():
        return float(net_forward(net, x)[:, 0] @ weights)

    out, cache = net_forward_cached(net, x)
    grads, _ = net_backward(net, cache, weights[:, None])
    for name, param in net.params().items():
        assert rel_error(grads[name], numeric_grad(loss, param)) < 1e-4
    assert np.all((out > -1.0) & (out < 2.0))


def test_outcome_action_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    model = MLPOutcomeNet(net_init(4, [4, 8, 1]))
    a = rng.uniform(size=10)
    s = rng.integers(0, 2, size=10)
    X = rng.normal(size=(10, 2))
    h = 1e-6
    numeric = (model.predict(a + h, s, X) - model.predict(a - h, s, X)) / (2 * h)
    assert rel_error(model.action_gradient(a, s, X), numeric) < 1e-4


def test_structured_forward_sums_components():
    rng = np.random.default_rng(3)
    net = structured_init(0, 3, hidden=6, depth=1)
    net.output_shift, net.output_scale = 0.7, 1.9
    X = rng.normal(size=(8, 3))
    f, g, h, total = structured_forward(net, rng.uniform(size=8), rng.integers(0, 2, 8), X)
    np.testing.assert_array_equal(total, f + g + h)


def test_structured_gradients_with_anchor_match_finite_differences():
    rng = np.random.default_rng(4)
    net = structured_init(1, 2, hidden=5, depth=1)
    net.output_scale = 1.3
    a, s = rng.uniform(size=7), rng.integers(0, 2, 7)
    X, y = rng.normal(size=(7, 2)), rng.normal(size=7)
    grads, _ = structured_gradients(net, a, s, X, y, anchor_action=0.2, anchor_weight=0.8)
    params = net.params()
    for name in ("f.W0", "g.W0", "g.b1", "h.W1"):
        num = numeric_grad(lambda: structured_gradients(net, a, s, X, y, 0.2, 0.8)[1], params[name])
        assert rel_error(grads[name], num) < 1e-4


def test_g_action_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    net = structured_init(2, 2, hidden=5, depth=2)
    net.output_scale = 0.6
    a, s, X = rng.uniform(size=6), rng.integers(0, 2, 6), rng.normal(size=(6, 2))
    h = 1e-6
    numeric = (net.g_values(a + h, s, X) - net.g_values(a - h, s, X)) / (2 * h)
    assert rel_error(net.g_action_gradient(a, s, X), numeric) < 1e-4
    numeric_total = (net.predict(a + h, s, X) - net.predict(a - h, s, X)) / (2 * h)
    assert rel_error(net.action_gradient(a, s, X), numeric_total) < 1e-4


def test_structured_rejects_wrong_covariate_count():
    net = structured_init(0, 3, hidden=4, depth=1)
    with pytest.raises(ContractError):
        net.predict(0.5, 1, np.zeros((2, 2)))


def test_clipped_policy_stays_inside_interval_and_backprops():
    rng = np.random.default_rng(6)
    net = net_init(0, [3, 6, 1])
    inputs = rng.normal(size=(9, 3)) * 5
    lo = rng.uniform(-1, 0, size=9)
    hi = lo + rng.uniform(0.1, 2, size=9)
    actions, cache = clipped_forward(net, inputs, lo, hi)
    assert np.all(actions > lo) and np.all(actions < hi)

    weights = rng.normal(size=9)
    grads = clipped_backward(net, cache, weights)
    for name, param in net.params().items():
        num = numeric_grad(lambda: float(clipped_forward(net, inputs, lo, hi)[0] @ weights), param)
        assert rel_error(grads[name], num) < 1e-4


def test_single_row_clipped_action_and_bad_interval():
    net = net_init(0, [3, 4, 1])
    value = policy_forward_clipped(net, 1, np.array([0.1, 0.2]), (0.0, 1.0))
    assert 0.0 < value < 1.0
    with pytest.raises(ContractError):
        policy_forward_clipped(net, 1, np.array([0.1, 0.2]), (1.0, 1.0))


def test_first_adam_step_moves_each_parameter_by_lr():
    params = {"w": np.array([1.0, -2.0, 3.0])}
    grads = {"w": np.array([0.5, -4.0, 1e-3])}
    state = OptimizerState(lr=0.1)
    adam_step(params, grads, state)
    np.testing.assert_allclose(params["w"], [0.9, -1.9, 2.9], atol=1e-5)
    assert state.step == 1


def test_adam_minimizes_a_quadratic():
    params = {"w": np.array([5.0, -3.0])}
    state = OptimizerState(lr=0.01)
    for _ in range(3000):
        adam_step(params, {"w": 2.0 * params["w"]}, state)
    np.testing.assert_allclose(params["w"], 0.0, atol=1e-2)


def test_fit_regression_learns_a_linear_map():
    rng = np.random.default_rng(7)
    x = rng.normal(size=(400, 2))
    y = 3.0 * x[:, 0] - x[:, 1] + 2.0
    net = net_init(0, [2, 16, 1])
    net, trace = fit_regression(net, x, y, TrainConfig(epochs=400, lr=0.01, seed=0))
    assert trace[-1] < trace[0]
    assert r2_score(y, net_forward(net, x)[:, 0]) > 0.95


def test_minibatch_training_is_reproducible():
    rng = np.random.default_rng(8)
    x = rng.normal(size=(64, 2))
    y = x.sum(axis=1)
    cfg = TrainConfig(epochs=5, lr=0.01, batch_size=16, seed=3)
    first, _ = fit_regression(net_init(0, [2, 4, 1]), x, y, cfg)
    second, _ = fit_regression(net_init(0, [2, 4, 1]), x, y, cfg)
    assert first.fingerprint() == second.fingerprint()


def test_non_finite_loss_raises_training_error_with_trace():
    params = {"w": np.zeros(2)}

    def grad_fn(idx):
        return {"w": np.zeros(2)}, float("nan")

    with pytest.raises(TrainingError) as info:
        run_adam(params, grad_fn, 10, TrainConfig(epochs=3))
    assert len(info.value.loss_trace) == 1


def test_fit_structured_pins_g_at_anchor():
    rng = np.random.default_rng(9)
    n = 600
    a, s, X = rng.uniform(size=n), rng.integers(0, 2, n), rng.normal(size=(n, 1))
    y = X[:, 0] + 2.0 * s * a + a
    net = structured_init(0, 1, hidden=16, depth=1)
    cfg = TrainConfig(epochs=300, lr=0.01, anchor_weight=1.0)
    net, _ = fit_structured(net, a, s, X, y, cfg, anchor_action=0.0)
    assert r2_score(y, net.predict(a, s, X)) > 0.9
    g_at_anchor = net.g_values(0.0, s, X)
    assert np.sqrt(np.mean(g_at_anchor ** 2)) < 0.1 * np.std(y)


def test_train_config_validation():
    with pytest.raises(ContractError):
        TrainConfig(epochs=0)
    with pytest.raises(ContractError):
        TrainConfig(lr=0.0)
    assert TrainConfig(hidden=4, depth=2).widths(3) == [3, 4, 4, 1]


def test_saved_structured_net_reloads_identically(tmp_path):
    net = structured_init(0, 2, hidden=3, depth=1)
    net.output_shift, net.output_scale = 1.5, 0.5
    path = tmp_path / "net.json"
    save_net(net, path)
    loaded = load_net(path)
    assert loaded.fingerprint() == net.fingerprint()


def test_stack_inputs_broadcasts_scalars():
    out = stack_inputs(0.5, np.array([0, 1]), np.ones((2, 3)))
    assert out.shape == (2, 5)
    np.testing.assert_array_equal(out[:, 0], [0.5, 0.5])
