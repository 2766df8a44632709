import numpy as np
import pytest

from imrl import numeric
from imrl.errors import InvalidArchitecture, ShapeError


def test_param_count():
    p = numeric.init_params([2, 3, 1], seed=0)
    assert p.count() == 13  # 2*3 + 3 + 3*1 + 1


def test_init_deterministic():
    a = numeric.init_params([4, 8, 2], seed=7)
    b = numeric.init_params([4, 8, 2], seed=7)
    for x, y in zip(a.param_list(), b.param_list()):
        assert np.array_equal(x, y)


def test_init_rejects_single_layer():
    with pytest.raises(InvalidArchitecture):
        numeric.init_params([5], seed=0)


def test_forward_zero_weights_gives_bias():
    p = numeric.init_params([3, 2], seed=0)
    p.weights[0][:] = 0.0
    p.biases[0][:] = [1.5, -2.0]
    y, _ = numeric.mlp_forward(p, np.zeros(3))
    assert np.allclose(y, [1.5, -2.0])


def test_relu_clamps_hidden():
    p = numeric.init_params([1, 1, 1], seed=0)
    p.weights[0][:] = 0.0
    p.biases[0][:] = -1.0  # hidden pre-activation -1 -> post-ReLU 0
    p.weights[1][:] = 5.0
    p.biases[1][:] = 0.0
    y, cache = numeric.mlp_forward(p, np.array([3.0]))
    acts, pre = cache
    assert pre[0][0] == -1.0
    assert acts[1][0] == 0.0
    assert y[0] == 0.0


def test_forward_matches_hand_matrix_product():
    rng = np.random.default_rng(3)
    p = numeric.init_params([4, 5, 2], seed=3)
    x = rng.normal(size=4)
    h = np.maximum(x @ p.weights[0] + p.biases[0], 0.0)
    expected = h @ p.weights[1] + p.biases[1]
    y, _ = numeric.mlp_forward(p, x)
    assert np.allclose(y, expected, atol=1e-12)


def test_forward_shape_error():
    p = numeric.init_params([4, 2], seed=0)
    with pytest.raises(ShapeError):
        numeric.mlp_forward(p, np.zeros(3))


def test_backward_zero_upstream():
    p = numeric.init_params([3, 4, 2], seed=1)
    y, cache = numeric.mlp_forward(p, np.ones(3))
    grads, dx = numeric.mlp_backward(p, cache, np.zeros_like(y))
    assert all(np.all(g == 0) for g in grads)
    assert np.all(dx == 0)


def test_backward_identity_net():
    p = numeric.init_params([3, 3], seed=0)
    p.weights[0][:] = np.eye(3)
    p.biases[0][:] = 0.0
    y, cache = numeric.mlp_forward(p, np.array([1.0, 2.0, 3.0]))
    _, dx = numeric.mlp_backward(p, cache, np.ones_like(y))
    assert np.allclose(dx, 1.0)


def _grad_check(layer_dims, seed, rel_tol=1e-6):
    rng = np.random.default_rng(seed)
    p = numeric.init_params(layer_dims, seed=seed)
    x = rng.normal(size=layer_dims[0])
    target = rng.normal(size=layer_dims[-1])

    def loss_of(vec):
        arrays = numeric.unflatten_arrays(vec, p.param_list())
        q = p.replace_arrays(arrays)
        y, _ = numeric.mlp_forward(q, x)
        return 0.5 * np.sum((y - target) ** 2)

    y, cache = numeric.mlp_forward(p, x)
    grads, _ = numeric.mlp_backward(p, cache, y - target)
    analytic = numeric.flatten_arrays(grads)
    numeric_g = numeric.finite_diff_grad(loss_of, numeric.flatten_arrays(p.param_list()))
    denom = np.maximum(np.abs(numeric_g), 1e-8)
    assert np.max(np.abs(analytic - numeric_g) / denom) < rel_tol * 100


@pytest.mark.parametrize("seed", range(5))
def test_backward_matches_finite_difference(seed):
    _grad_check([3, 6, 4, 2], seed)


def test_batched_forward_backward_consistent_with_loop():
    rng = np.random.default_rng(11)
    p = numeric.init_params([3, 5, 2], seed=11)
    xs = rng.normal(size=(4, 3))
    y_batch, cache = numeric.mlp_forward(p, xs)
    d_y = rng.normal(size=y_batch.shape)
    grads_b, dx_b = numeric.mlp_backward(p, cache, d_y)
    acc = None
    for i in range(4):
        y, c = numeric.mlp_forward(p, xs[i])
        assert np.allclose(y, y_batch[i])
        g, dx = numeric.mlp_backward(p, c, d_y[i])
        assert np.allclose(dx, dx_b[i])
        acc = g if acc is None else [a + b for a, b in zip(acc, g)]
    for a, b in zip(acc, grads_b):
        assert np.allclose(a, b, atol=1e-12)


def test_finite_diff_square():
    g = numeric.finite_diff_grad(lambda w: float(w[0] ** 2), np.array([3.0]))
    assert abs(g[0] - 6.0) < 1e-6


def test_finite_diff_linear_and_constant():
    g = numeric.finite_diff_grad(lambda w: float(2.0 * w.sum()), np.zeros(3))
    assert np.allclose(g, 2.0, atol=1e-9)
    g0 = numeric.finite_diff_grad(lambda w: 1.0, np.ones(4))
    assert np.allclose(g0, 0.0)


def test_adam_zero_grad_noop():
    arrays = [np.ones((2, 2)), np.full(3, -1.0)]
    state = numeric.adam_init(arrays)
    out, state2 = numeric.adam_step(arrays, [np.zeros_like(a) for a in arrays], state)
    for a, b in zip(arrays, out):
        assert np.array_equal(a, b)
    assert state2.t == 1


def test_adam_first_step_sign_scaled():
    # at t=1, m_hat=g and v_hat=g^2, so the update is ~ -lr*sign(g)
    g = np.array([0.3, -2.0, 7.0])
    arrays = [np.zeros(3)]
    state = numeric.adam_init(arrays, lr=0.001)
    out, _ = numeric.adam_step(arrays, [g], state)
    expected = -0.001 * g / (np.abs(g) + 1e-8)
    assert np.allclose(out[0], expected, atol=1e-12)


def test_adam_deterministic():
    g = [np.array([0.5, -0.5])]
    a = [np.array([1.0, 2.0])]
    s = numeric.adam_init(a)
    o1, s1 = numeric.adam_step(a, g, s)
    o2, s2 = numeric.adam_step(a, g, numeric.adam_init(a))
    assert np.array_equal(o1[0], o2[0])
    assert s1.t == s2.t


def test_adam_shape_mismatch():
    a = [np.zeros(3)]
    s = numeric.adam_init(a)
    with pytest.raises(ShapeError):
        numeric.adam_step(a, [np.zeros(4)], s)


def test_checkpoint_roundtrip(tmp_path):
    p = numeric.init_params([5, 4, 3], seed=9)
    path = tmp_path / "net.par"
    numeric.save_params(p, path)
    q = numeric.load_params(path)
    assert q.layer_dims == p.layer_dims
    for a, b in zip(p.param_list(), q.param_list()):
        assert np.array_equal(a, b)
    with open(path, "rb") as f:
        assert f.read(8) == b"IMRLPAR1"
