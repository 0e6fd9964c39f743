import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cnnbigru.activations import ActivationKind
from cnnbigru.engine import (
    Adam,
    Model,
    ModelSpec,
    adam_step,
    backward,
    bigru_forward,
    conv1d_forward,
    cross_entropy_loss,
    dense_forward,
    global_average_pool,
    init_params,
    loss,
    loss_and_grads,
    maxpool1d_forward,
    model_forward,
    param_layout,
    train,
)
from cnnbigru.errors import DomainError, ShapeError

from oracles import max_relative_error, numeric_grads, ref_gru_cell, ref_model_forward


def tiny_spec(**kw):
    base = dict(input_len=8, n_classes=3, conv_filters=2, conv_kernel=3, pool_size=2, gru_units=2, dense_units=4)
    base.update(kw)
    return ModelSpec(**base)


def randomized(spec, seed):
    """Init params plus non-zero biases so every code path carries signal."""
    rng = np.random.default_rng(seed + 1000)
    params = init_params(spec, seed)
    for name in params:
        if name.endswith(".b"):
            params[name] = rng.normal(0, 0.5, params[name].shape)
    return params


# -- layers ------------------------------------------------------------------

class TestConv1d:
    def test_sliding_window(self):
        out = conv1d_forward(np.array([[1.0], [2.0], [3.0], [4.0]]), np.array([[1.0, 0.0, -1.0]]), np.zeros(1), "linear")
        np.testing.assert_array_equal(out, [[-2.0], [-2.0]])

    def test_zero_kernel_relu(self):
        x = np.random.default_rng(0).normal(size=(10, 1))
        out = conv1d_forward(x, np.zeros((4, 3)), np.zeros(4), "relu")
        assert out.shape == (8, 4) and not out.any()

    def test_one_by_one(self):
        assert conv1d_forward(np.array([[5.0]]), np.array([[2.0]]), np.array([1.0]), "linear").tolist() == [[11.0]]

    def test_too_short(self):
        with pytest.raises(ShapeError):
            conv1d_forward(np.ones((2, 1)), np.ones((1, 3)), np.zeros(1), "linear")

    def test_batched_matches_unbatched(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(5, 9, 1))
        W, b = rng.normal(size=(3, 3)), rng.normal(size=3)
        batched = conv1d_forward(X, W, b, "mish")
        for i in range(5):
            np.testing.assert_allclose(batched[i], conv1d_forward(X[i], W, b, "mish"), rtol=0, atol=1e-15)


class TestMaxPool:
    def test_windowed_max(self):
        assert maxpool1d_forward(np.array([[1.0], [3.0], [2.0], [5.0]]), 2).ravel().tolist() == [3.0, 5.0]

    def test_constant(self):
        out = maxpool1d_forward(np.full((6, 2), 7.5), 2)
        assert out.shape == (3, 2) and np.all(out == 7.5)

    def test_remainder_dropped(self):
        assert maxpool1d_forward(np.array([[7.0], [1.0], [4.0]]), 2).ravel().tolist() == [7.0]

    @pytest.mark.parametrize("pool", [0, -1])
    def test_bad_pool(self, pool):
        with pytest.raises(DomainError):
            maxpool1d_forward(np.ones((4, 1)), pool)


def gru_params(rng, units, ch, scale=1.0):
    return {
        f"{d}.{n}": rng.normal(0, scale, shape)
        for d in ("fwd", "bwd")
        for n, shape in (("W", (3, units, ch)), ("U", (3, units, units)), ("b", (3, units)))
    }


class TestBiGRU:
    @pytest.mark.parametrize("act", ["tanh", "mish", "relu"])
    def test_zero_params_zero_output(self, act):
        seq = np.random.default_rng(0).normal(size=(5, 3))
        params = {k: np.zeros_like(v) for k, v in gru_params(np.random.default_rng(0), 4, 3).items()}
        out = bigru_forward(seq, params, 4, act)
        assert out.shape == (5, 8) and not out.any()

    @pytest.mark.parametrize("act", ["tanh", "mish"])
    def test_single_step_equals_one_cell_each_way(self, act):
        rng = np.random.default_rng(4)
        params = gru_params(rng, 3, 2)
        x = rng.normal(size=2)
        out = bigru_forward(x[None], params, 3, act)[0]
        lists = {k: v.tolist() for k, v in params.items()}
        expected = (
            ref_gru_cell(x.tolist(), [0.0] * 3, lists["fwd.W"], lists["fwd.U"], lists["fwd.b"], act)
            + ref_gru_cell(x.tolist(), [0.0] * 3, lists["bwd.W"], lists["bwd.U"], lists["bwd.b"], act)
        )
        np.testing.assert_allclose(out, expected, rtol=0, atol=1e-12)

    def test_reversal_swaps_directions(self):
        rng = np.random.default_rng(5)
        p = gru_params(rng, 3, 2)
        swapped = {**{k.replace("fwd", "tmp"): v for k, v in p.items() if k.startswith("fwd")},
                   **{k: v for k, v in p.items() if k.startswith("bwd")}}
        swapped = {k.replace("bwd", "fwd").replace("tmp", "bwd"): v for k, v in swapped.items()}
        seq = rng.normal(size=(6, 2))
        out = bigru_forward(seq, p, 3, "tanh")
        rev = bigru_forward(seq[::-1], swapped, 3, "tanh")
        np.testing.assert_allclose(rev[::-1, :3], out[:, 3:], atol=1e-14)
        np.testing.assert_allclose(rev[::-1, 3:], out[:, :3], atol=1e-14)

    def test_shape_mismatch(self):
        p = gru_params(np.random.default_rng(0), 3, 2)
        with pytest.raises(ShapeError):
            bigru_forward(np.ones((4, 5)), p, 3, "tanh")


class TestDenseAndGap:
    def test_identity(self):
        x = np.array([0.5, -2.0, 3.0])
        np.testing.assert_array_equal(dense_forward(x, np.eye(3), np.zeros(3), "linear"), x)

    def test_constant(self):
        out = dense_forward(np.array([1.0, 9.0]), np.zeros((4, 2)), np.full(4, 2.5), "relu")
        assert out.tolist() == [2.5] * 4

    def test_hand_matmul(self):
        out = dense_forward(np.array([1.0, 2.0]), np.array([[1.0, 1.0], [1.0, -1.0]]), np.zeros(2), "linear")
        assert out.tolist() == [3.0, -1.0]

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            dense_forward(np.ones(3), np.ones((2, 2)), np.zeros(2), "linear")

    def test_gap(self):
        np.testing.assert_array_equal(global_average_pool(np.full((4, 3), 1.5)), [1.5] * 3)
        assert global_average_pool(np.array([[1.0], [3.0]])).tolist() == [2.0]
        seq = np.random.default_rng(0).normal(size=(7, 3))
        perm = np.random.default_rng(1).permutation(7)
        np.testing.assert_allclose(global_average_pool(seq[perm]), global_average_pool(seq), atol=1e-15)
        with pytest.raises(ShapeError):
            global_average_pool(np.zeros((0, 3)))


# -- model ---------------------------------------------------------------------

class TestModelSpec:
    def test_defaults_follow_architecture_table(self):
        spec = ModelSpec(input_len=20)
        assert (spec.conv_filters, spec.conv_kernel, spec.pool_size, spec.gru_units, spec.dense_units) == (32, 3, 2, 64, 128)
        assert spec.head == "dense"

    @pytest.mark.parametrize("kw", [dict(input_len=2), dict(input_len=8, n_classes=1), dict(input_len=8, output="sigmoid", n_classes=3),
                                    dict(input_len=8, head="flatten"), dict(input_len=8, gru_units=0), dict(input_len=3)])
    def test_invalid(self, kw):
        with pytest.raises((DomainError, ShapeError)):
            ModelSpec(**kw)

    def test_dict_round_trip(self):
        spec = tiny_spec(hidden_activation=ActivationKind("lrelu", 0.2), head="gap")
        assert ModelSpec.from_dict(spec.to_dict()) == spec


class TestModelForward:
    def test_zero_params_softmax_uniform(self):
        spec = tiny_spec()
        params = {k: np.zeros_like(v) for k, v in init_params(spec, 0).items()}
        np.testing.assert_allclose(model_forward(spec, params, np.arange(8.0)), [1 / 3] * 3, atol=1e-15)

    def test_zero_params_sigmoid_half(self):
        spec = tiny_spec(n_classes=2, output="sigmoid")
        params = {k: np.zeros_like(v) for k, v in init_params(spec, 0).items()}
        assert model_forward(spec, params, np.arange(8.0)).tolist() == [0.5]

    @pytest.mark.parametrize("act", ["relu", "mish", "tanh", "elu", "prelu"])
    @pytest.mark.parametrize("head,output,K", [("dense", "softmax", 3), ("gap", "softmax", 3), ("dense", "sigmoid", 2)])
    def test_matches_reference_pipeline(self, act, head, output, K):
        spec = tiny_spec(hidden_activation=act, head=head, output=output, n_classes=K)
        params = randomized(spec, 7)
        x = np.random.default_rng(7).normal(size=8)
        ref = ref_model_forward({k: v.tolist() for k, v in params.items()}, x.tolist(), kernel=3, pool=2, units=2,
                                act=act, head=head, output=output, alpha=spec.hidden_activation.alpha)
        np.testing.assert_allclose(model_forward(spec, params, x), ref, rtol=0, atol=1e-12)

    def test_batch_equals_rows(self):
        spec = tiny_spec()
        params = randomized(spec, 1)
        X = np.random.default_rng(2).normal(size=(6, 8))
        batch = model_forward(spec, params, X)
        for i in range(6):
            np.testing.assert_allclose(batch[i], model_forward(spec, params, X[i]), atol=1e-15)

    def test_wrong_length(self):
        spec = tiny_spec()
        with pytest.raises(ShapeError):
            model_forward(spec, init_params(spec, 0), np.zeros(7))

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(-1e3, 1e3), min_size=8, max_size=8), st.integers(0, 5), st.sampled_from(["relu", "mish", "tanh"]))
    def test_output_is_probability_vector(self, x, seed, act):
        spec = tiny_spec(hidden_activation=act)
        p = model_forward(spec, randomized(spec, seed), np.array(x))
        assert abs(p.sum() - 1.0) <= 1e-9
        assert np.all((p >= 0) & (p <= 1))


class TestLoss:
    def test_examples(self):
        assert cross_entropy_loss([1.0, 0.0, 0.0], 0) == 0.0
        assert cross_entropy_loss([1 / 3] * 3, 2) == pytest.approx(1.098612, abs=1e-6)
        assert cross_entropy_loss([0.5], 1) == pytest.approx(0.693147, abs=1e-6)
        assert cross_entropy_loss([0.5], 0) == pytest.approx(math.log(2), abs=1e-12)

    def test_clamped(self):
        assert cross_entropy_loss([1.0, 0.0], 1) == pytest.approx(-math.log(1e-12))

    def test_label_out_of_range(self):
        with pytest.raises(DomainError):
            cross_entropy_loss([0.5, 0.5], 2)
        with pytest.raises(DomainError):
            cross_entropy_loss([0.5], 2)

    @pytest.mark.parametrize("output,K", [("softmax", 3), ("sigmoid", 2)])
    def test_training_loss_matches_probability_form(self, output, K):
        spec = tiny_spec(output=output, n_classes=K)
        params = randomized(spec, 3)
        X = np.random.default_rng(3).normal(size=(5, 8))
        y = np.array([0, 1, 1, 0, 1])
        probs = model_forward(spec, params, X)
        expected = np.mean([cross_entropy_loss(probs[i], int(y[i])) for i in range(5)])
        assert loss(spec, params, X, y) == pytest.approx(expected, rel=1e-12)


# -- backward ------------------------------------------------------------------

@pytest.mark.parametrize("act", ["mish", "relu", "tanh", "prelu", "elu"])
@pytest.mark.parametrize("head,output,K", [("dense", "softmax", 3), ("gap", "softmax", 3), ("dense", "sigmoid", 2)])
def test_backward_matches_finite_differences(act, head, output, K):
    spec = tiny_spec(hidden_activation=act, head=head, output=output, n_classes=K)
    params = randomized(spec, 11)
    rng = np.random.default_rng(11)
    x, label = rng.normal(size=8), int(rng.integers(K))
    analytic = backward(spec, params, x, label)
    numeric = numeric_grads(lambda: loss(spec, params, x[None], [label]), params, h=1e-4)
    assert set(analytic) == {name for name, _ in param_layout(spec)}
    assert max_relative_error(analytic, numeric) <= 1e-3


def test_batched_gradient_is_mean_of_per_sample():
    spec = tiny_spec()
    params = randomized(spec, 2)
    rng = np.random.default_rng(2)
    X, y = rng.normal(size=(4, 8)), np.array([0, 2, 1, 2])
    _, batch = loss_and_grads(spec, params, X, y)
    per = [backward(spec, params, X[i], int(y[i])) for i in range(4)]
    for name in batch:
        np.testing.assert_allclose(batch[name], np.mean([g[name] for g in per], axis=0), atol=1e-14)


def test_dead_conv_filter_gets_zero_gradient():
    spec = tiny_spec(hidden_activation="relu")
    params = randomized(spec, 5)
    params["conv.b"][1] = -100.0  # filter 1 never activates
    grads = backward(spec, params, np.random.default_rng(5).normal(size=8), 1)
    assert not grads["conv.W"][1].any() and grads["conv.b"][1] == 0.0
    assert grads["conv.W"][0].any()


def test_confident_correct_prediction_has_near_zero_gradient():
    spec = tiny_spec()
    params = randomized(spec, 6)
    params["out.b"][:] = [0.0, 30.0, 0.0]
    x = np.random.default_rng(6).normal(size=8)
    assert cross_entropy_loss(model_forward(spec, params, x), 1) < 1e-12
    grads = backward(spec, params, x, 1)
    assert max(np.abs(g).max() for g in grads.values()) < 1e-10


def test_clamped_loss_has_zero_gradient():
    spec = tiny_spec()
    params = randomized(spec, 6)
    params["out.b"][:] = [0.0, 60.0, 0.0]
    grads = backward(spec, params, np.zeros(8), 0)
    assert all(not g.any() for g in grads.values())


# -- Adam ----------------------------------------------------------------------

class TestAdam:
    @pytest.mark.parametrize("g", [3.7, -0.05, 1e4])
    def test_first_step_is_lr_times_sign(self, g):
        params = {"w": np.array([1.0])}
        Adam(lr=1e-3).step(params, {"w": np.array([g])})
        assert params["w"][0] - 1.0 == pytest.approx(-1e-3 * np.sign(g), abs=1e-3 * 1e-6)

    def test_first_step_small_gradient_exact(self):
        # bias-corrected first step is lr * g / (|g| + eps)
        params = {"w": np.array([0.0])}
        Adam(lr=1e-3, eps=1e-8).step(params, {"w": np.array([-0.002])})
        assert params["w"][0] == pytest.approx(1e-3 * 0.002 / (0.002 + 1e-8), rel=1e-12)

    def test_zero_gradient(self):
        params = {"w": np.array([1.0, -2.0])}
        opt = Adam()
        params, opt = adam_step(opt, params, {"w": np.zeros(2)})
        assert params["w"].tolist() == [1.0, -2.0] and opt.t == 1

    def test_two_steps_constant_gradient(self):
        # hand simulation: m1 = 0.1g, v1 = 0.001g^2 -> mhat = g, vhat = g^2; same at t = 2
        params = {"w": np.array([0.0])}
        opt = Adam(lr=0.1)
        trail = [0.0]
        for _ in range(2):
            opt.step(params, {"w": np.array([2.0])})
            trail.append(params["w"][0])
        assert trail[0] > trail[1] > trail[2]
        assert trail[2] == pytest.approx(-0.2, abs=1e-7)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            Adam().step({"w": np.zeros(2)}, {"w": np.zeros(3)})
        with pytest.raises(ShapeError):
            Adam().step({"w": np.zeros(2)}, {"v": np.zeros(2)})

    def test_moments_mirror_params(self):
        spec = tiny_spec()
        params = init_params(spec, 0)
        opt = Adam()
        _, grads = loss_and_grads(spec, params, np.ones((2, 8)), np.array([0, 1]))
        opt.step(params, grads)
        assert {k: v.shape for k, v in opt.m.items()} == {k: v.shape for k, v in params.items()}
        assert {k: v.shape for k, v in opt.v.items()} == {k: v.shape for k, v in params.items()}


# -- training ------------------------------------------------------------------

def test_training_is_deterministic():
    rng = np.random.default_rng(0)
    X, y = rng.normal(size=(20, 8)), rng.integers(0, 3, 20)
    runs = []
    for _ in range(2):
        m = Model.create(tiny_spec(hidden_activation="mish"), seed=3)
        trace = train(m, X, y, epochs=3, batch_size=8, seed=9)
        runs.append((trace, m.params))
    assert runs[0][0] == runs[1][0]
    for k in runs[0][1]:
        assert runs[0][1][k].tobytes() == runs[1][1][k].tobytes()


def test_prelu_alpha_is_learned():
    rng = np.random.default_rng(0)
    X, y = rng.normal(size=(16, 8)), rng.integers(0, 3, 16)
    m = Model.create(tiny_spec(hidden_activation="prelu"), seed=0)
    before = m.params["conv.alpha"].copy()
    train(m, X, y, epochs=2, batch_size=8)
    assert m.params["conv.alpha"][0] != before[0]


@pytest.mark.parametrize("act", ["relu", "mish"])
def test_overfits_random_labels(act):
    rng = np.random.default_rng(0)
    X, y = rng.normal(size=(32, 8)), rng.integers(0, 3, 32)
    m = Model.create(ModelSpec(input_len=8, n_classes=3, hidden_activation=act), seed=0)
    opt = Adam(lr=1e-3)
    for _ in range(2000):
        value, grads = loss_and_grads(m.spec, m.params, X, y)
        if value < 0.05:
            break
        opt.step(m.params, grads)
    assert value < 0.05
