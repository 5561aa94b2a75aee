import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from disrc import nn
from disrc.exceptions import NumericError, ShapeError, UsageError
from gradcheck import max_rel_error, numeric_input_grad, numeric_param_grads


def test_layernorm_reference_values():
    ln = nn.Mlp([nn.LayerNorm(np.ones(3), np.zeros(3), eps=1e-12)])
    out = ln(np.array([1.0, 2.0, 3.0]))
    # mean 2, population variance 2/3 -> (x - 2) / sqrt(2/3)
    expected = np.array([-1.0, 0.0, 1.0]) / np.sqrt(2.0 / 3.0)
    np.testing.assert_allclose(out, expected, atol=1e-9)
    np.testing.assert_allclose(out, [-1.2247, 0.0, 1.2247], atol=1e-4)


def test_relu_and_identity_dense():
    relu = nn.Mlp([nn.Dense(np.eye(3), np.zeros(3)), nn.ReLU()])
    np.testing.assert_array_equal(relu(np.array([-1.0, 0.0, 2.0])), [0.0, 0.0, 2.0])
    ident = nn.Mlp([nn.Dense(np.eye(4), np.zeros(4))])
    x = np.array([0.3, -1.5, 2.0, 7.0])
    np.testing.assert_array_equal(ident(x), x)


def test_forward_rejects_bad_shape():
    net = nn.init_mlp((4, 8, 3), seed=0)
    with pytest.raises(ShapeError):
        nn.forward(net, np.zeros(5))


def test_forward_does_not_mutate_input():
    net = nn.Mlp([nn.ReLU(), nn.Dense(np.eye(3), np.zeros(3))])
    x = np.array([-1.0, 0.5, 2.0])
    before = x.copy()
    net(x)
    np.testing.assert_array_equal(x, before)


def test_gradients_match_finite_differences_small_net():
    rng = np.random.default_rng(1)
    net = nn.init_mlp((4, 8, 3), seed=2)
    x = rng.normal(size=(5, 4))
    d_out = rng.normal(size=(5, 3))
    _, cache = nn.forward(net, x)
    grads, d_in = nn.backward(net, cache, d_out)
    for ga, gn in zip(grads, numeric_param_grads(net, x, d_out)):
        assert max_rel_error(ga, gn) < 1e-4
    assert max_rel_error(d_in, numeric_input_grad(net, x, d_out)) < 1e-4


def test_zero_upstream_gradient_gives_zero_grads():
    net = nn.init_mlp((4, 8, 3), seed=0)
    _, cache = nn.forward(net, np.ones((2, 4)))
    grads, d_in = nn.backward(net, cache, np.zeros((2, 3)))
    assert all(not g.any() for g in grads)
    assert not d_in.any()


def test_single_dense_weight_gradient_is_input():
    w = np.array([[0.5, -1.0, 2.0]])
    net = nn.Mlp([nn.Dense(w.copy(), np.zeros(1))])
    x = np.array([1.0, 2.0, 3.0])
    _, cache = nn.forward(net, x)
    (d_w, d_b), _ = nn.backward(net, cache, np.array([0.7]))
    np.testing.assert_allclose(d_w, 0.7 * x[None, :])
    np.testing.assert_allclose(d_b, [0.7])


def test_backward_rejects_reused_or_stale_cache():
    net = nn.init_mlp((3, 4, 2), seed=0)
    _, cache = nn.forward(net, np.ones(3))
    nn.backward(net, cache, np.ones(2))
    with pytest.raises(UsageError):
        nn.backward(net, cache, np.ones(2))

    _, cache = nn.forward(net, np.ones(3))
    grads = [np.ones_like(p) for p in net.params()]
    nn.adam_step(net, grads, nn.AdamState.for_params(net, lr=1e-3))
    with pytest.raises(UsageError):
        nn.backward(net, cache, np.ones(2))

    other = net.copy()
    _, cache = nn.forward(net, np.ones(3))
    with pytest.raises(UsageError):
        nn.backward(other, cache, np.ones(2))


def test_skipping_input_gradient_keeps_param_grads():
    net = nn.init_mlp((5, 6, 2), seed=4)
    x = np.random.default_rng(0).normal(size=(3, 5))
    d = np.ones((3, 2))
    g1, _ = nn.backward(net, nn.forward(net, x)[1], d)
    g2, d_in = nn.backward(net, nn.forward(net, x)[1], d, need_input_grad=False)
    assert d_in is None
    for a, b in zip(g1, g2):
        np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize(
    "grads, max_norm, expected",
    [
        ([np.array([3.0, 4.0])], 0.3, [np.array([0.18, 0.24])]),
        ([np.array([0.6, 0.8])], 0.25, [np.array([0.15, 0.2])]),
        ([np.array([0.06, 0.08])], 0.25, [np.array([0.06, 0.08])]),
    ],
)
def test_clip_grad_norm_examples(grads, max_norm, expected):
    nn.clip_grad_norm(grads, max_norm)
    for g, e in zip(grads, expected):
        np.testing.assert_allclose(g, e, rtol=1e-12)


def test_clip_grad_norm_returns_scale_and_rejects_nan():
    grads = [np.array([1.0, 0.0]), np.array([[0.0]])]
    assert nn.clip_grad_norm(grads, 0.25) == pytest.approx(0.25)
    with pytest.raises(NumericError):
        nn.clip_grad_norm([np.array([np.nan])], 1.0)
    with pytest.raises(ValueError):
        nn.clip_grad_norm([np.array([1.0])], 0.0)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=12),
    st.floats(1e-3, 10.0),
)
def test_clip_never_increases_norm(values, max_norm):
    g = [np.array(values)]
    before = nn.global_norm(g)
    nn.clip_grad_norm(g, max_norm)
    after = nn.global_norm(g)
    assert after <= before + 1e-12
    assert after <= max_norm + 1e-12


def test_adam_first_step_moves_by_lr():
    p = [np.array([1.0])]
    state = nn.AdamState.for_params(p, lr=1e-4)
    nn.adam_step(p, [np.array([0.5])], state)
    # m_hat = 0.5, v_hat = 0.25 -> step = lr * 0.5 / (0.5 + 1e-8)
    expected = 1.0 - 1e-4 * 0.5 / (0.5 + 1e-8)
    assert p[0][0] == pytest.approx(expected, abs=1e-15)
    assert abs(abs(p[0][0] - 1.0) - 1e-4) < 1e-9
    assert state.t == 1


def test_adam_zero_gradient_is_fixed_point():
    p = [np.array([0.3, -0.2])]
    state = nn.AdamState.for_params(p, lr=1e-3)
    nn.adam_step(p, [np.zeros(2)], state)
    np.testing.assert_array_equal(p[0], [0.3, -0.2])


def test_adam_shape_mismatch():
    p = [np.zeros(3)]
    state = nn.AdamState.for_params(p, lr=1e-3)
    with pytest.raises(ShapeError):
        nn.adam_step(p, [np.zeros(4)], state)


def test_adam_matches_textbook_over_several_steps():
    rng = np.random.default_rng(0)
    p = [rng.normal(size=4)]
    ref = p[0].copy()
    m = np.zeros(4)
    v = np.zeros(4)
    state = nn.AdamState.for_params(p, lr=1e-2)
    for t in range(1, 6):
        g = rng.normal(size=4)
        nn.adam_step(p, [g.copy()], state)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        ref -= 1e-2 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
    np.testing.assert_allclose(p[0], ref, rtol=1e-12, atol=1e-15)


def test_training_is_deterministic():
    def run():
        net = nn.init_mlp((3, 5, 2), seed=11)
        opt = nn.AdamState.for_params(net, lr=1e-2)
        x = np.linspace(0, 1, 6).reshape(2, 3)
        for _ in range(5):
            out, cache = nn.forward(net, x)
            grads, _ = nn.backward(net, cache, out)
            nn.adam_step(net, grads, opt)
        return [p.copy() for p in net.params()]

    for a, b in zip(run(), run()):
        assert a.tobytes() == b.tobytes()


def test_init_mlp_parameter_count_and_bounds():
    net = nn.init_mlp((147, 256, 256, 7), seed=0)
    expected = 147 * 256 + 256 + 256 * 256 + 256 + 256 * 7 + 7 + 2 * 256 * 2
    assert net.n_params == expected
    for layer in net.layers:
        if isinstance(layer, nn.Dense):
            assert np.all(np.abs(layer.W) <= np.sqrt(6.0 / layer.in_dim))
            assert not layer.b.any()
        elif isinstance(layer, nn.LayerNorm):
            assert np.all(layer.gain == 1.0) and not layer.bias.any()
    kinds = [type(layer).__name__ for layer in net.layers]
    assert kinds == ["Dense", "LayerNorm", "ReLU", "Dense", "LayerNorm", "ReLU", "Dense"]


def test_init_mlp_same_seed_same_weights():
    a, b = nn.init_mlp((6, 5, 2), seed=9), nn.init_mlp((6, 5, 2), seed=9)
    for pa, pb in zip(a.params(), b.params()):
        assert pa.tobytes() == pb.tobytes()


def test_forward_is_pure():
    net = nn.init_mlp((6, 5, 2), seed=3)
    x = np.arange(6.0)
    assert net(x).tobytes() == net(x).tobytes()


def test_mlp_rejects_incompatible_layers():
    with pytest.raises(ShapeError):
        nn.Mlp([nn.Dense(np.zeros((3, 2)), np.zeros(3)), nn.Dense(np.zeros((2, 4)), np.zeros(2))])
    with pytest.raises(ShapeError):
        nn.Mlp([nn.LayerNorm(np.ones(3), np.zeros(3), eps=0.0)])


def test_checkpoint_roundtrip(tmp_path):
    net = nn.init_mlp((7, 5, 3), seed=1)
    path = tmp_path / "net.bin"
    nn.save_mlp(net, path)
    raw = path.read_bytes()
    assert raw[:8] == b"DISRCNN1"
    loaded = nn.load_mlp(path)
    assert [type(layer) for layer in loaded.layers] == [type(layer) for layer in net.layers]
    for a, b in zip(net.params(), loaded.params()):
        assert a.tobytes() == b.tobytes()
    # body is the parameters as little-endian f64, in declaration order
    body = np.concatenate([p.ravel() for p in net.params()]).astype("<f8").tobytes()
    assert raw.endswith(body)


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"not a checkpoint")
    with pytest.raises(ValueError):
        nn.load_mlp(path)
