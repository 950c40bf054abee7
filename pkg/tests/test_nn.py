"""Network tests: the backprop finite-difference oracle is the centerpiece."""

import math

import numpy as np
import pytest

from zorro.activations import make_spec, parse_spec
from zorro.data import Dataset, synth_blobs
from zorro.nn import (
    TrainConfig,
    TrainingDiverged,
    adam_init,
    adam_step,
    backward,
    cross_entropy,
    evaluate_net,
    forward,
    init_net,
    load_checkpoint,
    save_checkpoint,
    softmax,
    train,
)


def loss_of(net, x, y):
    logits, _ = forward(net, x)
    return cross_entropy(logits, y)


def fd_loss_grads(net, x, y, h=1e-6):
    """Central finite differences of the loss w.r.t. every parameter."""
    grads_w = [np.zeros_like(w) for w in net.weights]
    grads_b = [np.zeros_like(b) for b in net.biases]
    for param, grad in list(zip(net.weights, grads_w)) + list(zip(net.biases, grads_b)):
        flat_p, flat_g = param.ravel(), grad.ravel()
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + h
            lp = loss_of(net, x, y)
            flat_p[i] = orig - h
            lm = loss_of(net, x, y)
            flat_p[i] = orig
            flat_g[i] = (lp - lm) / (2.0 * h)
    return grads_w, grads_b


class TestInit:
    def test_deterministic(self):
        a = init_net([784, 128, 10], make_spec("relu"), seed=1)
        b = init_net([784, 128, 10], make_spec("relu"), seed=1)
        for wa, wb in zip(a.weights, b.weights):
            np.testing.assert_array_equal(wa, wb)

    def test_glorot_bound(self):
        net = init_net([2, 2], make_spec("relu"), seed=5)
        assert np.max(np.abs(net.weights[0])) <= math.sqrt(6.0 / 4.0)

    def test_shapes_chain(self):
        net = init_net([784, 128, 128, 10], make_spec("relu"), seed=0)
        assert [w.shape for w in net.weights] == [(784, 128), (128, 128), (128, 10)]
        assert all(np.all(b == 0) for b in net.biases)

    def test_rejects_zero_width(self):
        with pytest.raises(ValueError):
            init_net([4, 0, 2], make_spec("relu"), seed=0)
        with pytest.raises(ValueError):
            init_net([4], make_spec("relu"), seed=0)


class TestForward:
    def test_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(0)
        logits = rng.uniform(-1e4, 1e4, size=(64, 10))
        np.testing.assert_allclose(softmax(logits).sum(axis=1), 1.0, atol=1e-12)

    def test_zero_net_is_uniform(self):
        net = init_net([3, 4, 5], make_spec("relu"), seed=0)
        for w in net.weights:
            w[:] = 0.0
        logits, _ = forward(net, np.ones((2, 3)))
        np.testing.assert_allclose(softmax(logits), 0.2, atol=1e-15)

    def test_hand_computed_single_hidden_layer(self):
        # 3-neuron worked example; expected values spelled out step by step
        net = init_net([2, 3, 2], make_spec("relu"), seed=0)
        net.weights[0][:] = [[0.1, -0.2, 0.5], [0.3, 0.4, -0.1]]
        net.biases[0][:] = [0.01, -0.02, 0.03]
        net.weights[1][:] = [[1.0, -1.0], [0.5, 0.5], [-0.2, 0.2]]
        net.biases[1][:] = [0.0, 0.1]
        x = np.array([[0.6, 0.9]])
        z1 = [0.6 * 0.1 + 0.9 * 0.3 + 0.01,
              0.6 * -0.2 + 0.9 * 0.4 - 0.02,
              0.6 * 0.5 + 0.9 * -0.1 + 0.03]
        h = [max(0.0, v) for v in z1]
        want = [h[0] * 1.0 + h[1] * 0.5 + h[2] * -0.2 + 0.0,
                h[0] * -1.0 + h[1] * 0.5 + h[2] * 0.2 + 0.1]
        logits, cache = forward(net, x)
        np.testing.assert_allclose(logits[0], want, rtol=1e-15)
        np.testing.assert_allclose(cache[0][0][0], z1, rtol=1e-15)

    def test_rejects_shape_mismatch(self):
        net = init_net([4, 3, 2], make_spec("relu"), seed=0)
        with pytest.raises(ValueError):
            forward(net, np.ones((5, 3)))


class TestBackward:
    @pytest.mark.parametrize("spec_text", [
        "sigmoid",
        "gsigmoid(a=2,b=0.3)",
        "tanh",
        "relu",
        "leaky_relu(alpha=0.01)",
        "elu(alpha=1)",
        "swish(beta=1.5)",
        "silu",
        "gelu_exact",
        "gelu_swish",
        "dswish(beta=1.702)",
        "dsilu",
        "dgelu",
        "zorro_sym(a=2,b=0.5)",
        "zorro_asym(a_i=6,a_s=0.8,b=0.4)",
        "zorro_sigmoid(a=2,b=0.5)",
        "zorro_tanh(a=3.5,b=1)",
        "zorro_sloped(m=1.3,a=2,b=0.3)",
    ])
    def test_gradients_match_loss_fd(self, spec_text):
        rng = np.random.default_rng(42)
        net = init_net([4, 5, 3], parse_spec(spec_text), seed=3)
        x = rng.uniform(0, 1, size=(8, 4))
        y = rng.integers(0, 3, size=8)
        logits, cache = forward(net, x)
        gw, gb = backward(net, cache, y)
        fw, fb = fd_loss_grads(net, x, y)
        for a, f in zip(gw + gb, fw + fb):
            err = np.abs(a - f)
            assert np.all(err <= 1e-5 * np.maximum(1.0, np.abs(a))), spec_text

    def test_peaked_softmax_gives_zero_gradients(self):
        net = init_net([2, 3, 3], make_spec("relu"), seed=0)
        for w in net.weights:
            w[:] = 0.0
        net.biases[1][:] = [50.0, 0.0, -50.0]
        x = np.ones((4, 2))
        y = np.zeros(4, dtype=int)
        logits, cache = forward(net, x)
        gw, gb = backward(net, cache, y)
        for g in gw + gb:
            assert np.max(np.abs(g)) < 1e-20

    def test_label_out_of_range(self):
        net = init_net([2, 3, 3], make_spec("relu"), seed=0)
        logits, cache = forward(net, np.ones((1, 2)))
        with pytest.raises(ValueError):
            backward(net, cache, np.array([3]))


class TestAdam:
    def test_zero_gradients_leave_parameters(self):
        net = init_net([2, 3, 2], make_spec("relu"), seed=1)
        before = [w.copy() for w in net.weights]
        state = adam_init(net)
        zeros = ([np.zeros_like(w) for w in net.weights],
                 [np.zeros_like(b) for b in net.biases])
        adam_step(net, state, zeros, TrainConfig())
        for w, orig in zip(net.weights, before):
            np.testing.assert_array_equal(w, orig)
        assert state.step == 1

    def test_first_step_magnitude_is_lr(self):
        net = init_net([1, 1], make_spec("relu"), seed=1)
        w0 = net.weights[0][0, 0]
        state = adam_init(net)
        grads = ([np.array([[0.5]])], [np.array([0.0])])
        cfg = TrainConfig(learning_rate=0.01)
        adam_step(net, state, grads, cfg)
        update = net.weights[0][0, 0] - w0
        assert update == pytest.approx(-0.01, rel=1e-6)

    def test_quadratic_convergence(self):
        # scalar optimization oracle: minimize (w - 0.3)^2 from w = 1
        net = init_net([1, 1], make_spec("relu"), seed=1)
        net.weights[0][0, 0] = 1.0
        state = adam_init(net)
        cfg = TrainConfig(learning_rate=0.1)
        for _ in range(100):
            g = 2.0 * (net.weights[0][0, 0] - 0.3)
            adam_step(net, state, ([np.array([[g]])], [np.array([0.0])]), cfg)
        assert abs(net.weights[0][0, 0] - 0.3) <= 1e-2


def blobs_fixture():
    ds = synth_blobs(500, 2, 0.05, seed=7)
    from zorro.data import split
    return split(ds, 0.8, seed=1)


class TestTrain:
    def test_blobs_reach_95_percent(self):
        tr, va = blobs_fixture()
        net = init_net([2, 32, 2], make_spec("zorro_sym", a=2, b=0.5), seed=0)
        cfg = TrainConfig(learning_rate=0.01, epochs=15, batch_size=64, seed=0)
        net, hist = train(net, tr, va, cfg)
        assert hist.val_acc[-1] >= 0.95
        assert hist.train_loss[-1] < hist.train_loss[0]
        assert len(hist.val_acc) == 15

    def test_deterministic_histories_and_weights(self):
        tr, va = blobs_fixture()
        runs = []
        for _ in range(2):
            net = init_net([2, 16, 2], make_spec("relu"), seed=4)
            net, hist = train(net, tr, va, TrainConfig(epochs=3, batch_size=64, seed=4))
            runs.append((net, hist))
        assert runs[0][1].train_loss == runs[1][1].train_loss
        assert runs[0][1].val_acc == runs[1][1].val_acc
        for wa, wb in zip(runs[0][0].weights, runs[1][0].weights):
            np.testing.assert_array_equal(wa, wb)

    def test_zero_learning_rate_keeps_accuracy(self):
        tr, va = blobs_fixture()
        net = init_net([2, 16, 2], make_spec("relu"), seed=4)
        untrained_acc, _ = evaluate_net(net, va)
        net, hist = train(net, tr, va, TrainConfig(learning_rate=0.0, epochs=3,
                                                   batch_size=64, seed=4))
        assert hist.val_acc == [untrained_acc] * 3

    def test_divergence_aborts_with_diagnostic(self):
        tr, va = blobs_fixture()
        net = init_net([2, 128, 2], make_spec("relu"), seed=4)
        cfg = TrainConfig(learning_rate=1e154, epochs=3, batch_size=64, seed=4)
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(TrainingDiverged):
                train(net, tr, va, cfg)

    def test_class_count_mismatch(self):
        tr, va = blobs_fixture()
        net = init_net([2, 8, 5], make_spec("relu"), seed=0)
        with pytest.raises(ValueError):
            train(net, tr, va, TrainConfig(epochs=1))


class TestEvaluate:
    def test_perfect_predictor(self):
        feats = np.array([[0.0, 1.0], [1.0, 0.0]])
        ds = Dataset(feats, np.array([1, 0]), 2)
        net = init_net([2, 2], make_spec("relu"), seed=0)
        net.weights[0][:] = np.eye(2) * 10
        acc, ce = evaluate_net(net, ds)
        assert acc == 1.0
        assert ce < 1e-4

    def test_uniform_net_is_chance_level(self):
        rng = np.random.default_rng(1)
        feats = rng.uniform(0, 1, size=(1000, 3))
        labels = np.repeat(np.arange(10), 100)
        ds = Dataset(feats, labels, 10)
        net = init_net([3, 10], make_spec("relu"), seed=0)
        net.weights[0][:] = 0.0
        acc, ce = evaluate_net(net, ds)
        assert acc == pytest.approx(0.1)  # argmax ties resolve to class 0
        assert ce == pytest.approx(math.log(10), abs=1e-12)

    def test_hand_built_fixture_fraction(self):
        # three samples, two classes; class-0 column dominates twice
        feats = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        ds = Dataset(feats, np.array([0, 1, 1]), 2)
        net = init_net([2, 2], make_spec("relu"), seed=0)
        net.weights[0][:] = np.eye(2)
        acc, _ = evaluate_net(net, ds)
        assert acc == pytest.approx(2.0 / 3.0)


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        net = init_net([4, 5, 3], make_spec("zorro_sloped", m=1.3, a=2, b=0.3), seed=9)
        path = tmp_path / "net.znet"
        save_checkpoint(net, path)
        back = load_checkpoint(path)
        assert back.layer_dims == net.layer_dims
        assert back.hidden_activation == net.hidden_activation
        for wa, wb in zip(back.weights, net.weights):
            np.testing.assert_array_equal(wa, wb)
        for ba, bb in zip(back.biases, net.biases):
            np.testing.assert_array_equal(ba, bb)

    def test_rejects_garbage(self, tmp_path):
        path = tmp_path / "junk.znet"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(ValueError):
            load_checkpoint(path)
