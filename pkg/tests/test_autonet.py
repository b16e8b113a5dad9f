"""Autoencoder tests: construction, forward, gradients, Adam, training, I/O.

The forward oracle below evaluates the network neuron by neuron with
scalar math, sharing no array code with the implementation. Gradients are
checked against central finite differences; Adam against a hand-unrolled
recurrence.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tscnet.autonet import (
    AdamState,
    DenseLayer,
    DenseNetwork,
    LayerSpec,
    TrainHistory,
    adam_step,
    backward,
    build_autoencoder,
    build_network,
    count_parameters,
    forward,
    load_model,
    mse_loss,
    parameter_counts,
    predict_labels,
    round_labels,
    save_model,
    train,
)
from tscnet.errors import (
    BadWidth,
    EmptyDataset,
    ModelFormatError,
    NonFiniteInput,
    ShapeMismatch,
)
from tscnet.rng import Xorshift64Star, derive_seed


def oracle_forward(net, X):
    """Per-neuron scalar evaluation of the network, no shared array code."""
    outputs = []
    for sample in X:
        a = list(sample)
        for layer in net.layers:
            z = []
            for o in range(layer.spec.output_width):
                acc = float(layer.biases[o])
                for i in range(layer.spec.input_width):
                    acc += float(layer.weights[o][i]) * a[i]
                z.append(acc)
            if layer.spec.activation == "relu":
                a = [max(0.0, v) for v in z]
            elif layer.spec.activation == "sigmoid":
                a = [1.0 / (1.0 + math.exp(-v)) for v in z]
            else:
                a = z
        outputs.append(a)
    return np.array(outputs)


def numeric_gradients(net, X, y, eps=1e-5):
    grads = []
    for layer in net.layers:
        for arr in (layer.weights, layer.biases):
            g = np.zeros_like(arr)
            flat = arr.ravel()
            gflat = g.ravel()
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                up = mse_loss(forward(net, X)[0], y)
                flat[i] = orig - eps
                down = mse_loss(forward(net, X)[0], y)
                flat[i] = orig
                gflat[i] = (up - down) / (2.0 * eps)
            grads.append(g)
    return grads


def flat_gradients(net, X, y):
    _, cache = forward(net, X)
    return [g for pair in backward(net, cache, y) for g in pair]


def make_layer(weights, biases, activation):
    w = np.asarray(weights, dtype=float)
    b = np.asarray(biases, dtype=float)
    return DenseLayer(LayerSpec(w.shape[1], w.shape[0], activation), w, b)


class TestConstruction:
    def test_canonical_architecture(self):
        net = build_autoencoder(seed=7)
        assert net.widths() == [2, 100, 50, 20, 4, 20, 50, 100, 1]
        acts = [layer.spec.activation for layer in net.layers]
        assert acts == ["relu", "relu", "relu", "sigmoid", "relu", "relu", "relu", "linear"]
        assert parameter_counts(net) == [300, 5050, 1020, 84, 100, 1050, 5100, 101]
        assert count_parameters(net) == 12805

    def test_minimal_network(self):
        net = build_autoencoder(1, [1], 1, 1, seed=7)
        assert net.widths() == [1, 1, 1, 1, 1]
        assert len(net.layers) == 4

    def test_mirror_arithmetic(self):
        net = build_autoencoder(3, [5], 2, 1, seed=7)
        assert count_parameters(net) == 3 * 5 + 5 + 5 * 2 + 2 + 2 * 5 + 5 + 5 * 1 + 1 == 53

    def test_bad_widths(self):
        with pytest.raises(BadWidth):
            build_autoencoder(0, [5], 2, 1, seed=7)
        with pytest.raises(BadWidth):
            build_autoencoder(2, [5, 0], 2, 1, seed=7)
        with pytest.raises(BadWidth):
            LayerSpec(1, 1, "tanh")

    def test_width_chain_enforced(self):
        a = make_layer(np.zeros((3, 2)), np.zeros(3), "relu")
        b = make_layer(np.zeros((1, 4)), np.zeros(1), "linear")
        with pytest.raises(BadWidth):
            DenseNetwork([a, b])

    def test_init_bounds_and_zero_biases(self):
        net = build_autoencoder(seed=7)
        for layer in net.layers:
            limit = math.sqrt(6.0 / (layer.spec.input_width + layer.spec.output_width))
            assert np.all(np.abs(layer.weights) <= limit)
            assert np.all(layer.biases == 0.0)

    def test_init_deterministic(self):
        a = build_autoencoder(seed=42)
        b = build_autoencoder(seed=42)
        for la, lb in zip(a.layers, b.layers):
            assert np.array_equal(la.weights, lb.weights)

    def test_seeds_differ(self):
        a = build_autoencoder(seed=1)
        b = build_autoencoder(seed=2)
        assert not np.array_equal(a.layers[0].weights, b.layers[0].weights)


class TestForward:
    def test_zero_network_outputs_zero(self):
        specs = [LayerSpec(2, 3, "relu"), LayerSpec(3, 2, "sigmoid"), LayerSpec(2, 1, "linear")]
        net = DenseNetwork([make_layer(np.zeros(
            (s.output_width, s.input_width)), np.zeros(s.output_width), s.activation) for s in specs])
        out, cache = forward(net, [[5.0, -3.0], [0.1, 0.2]])
        # final linear layer sees sigmoid(0) = 0.5 inputs against zero weights
        assert np.all(out == 0.0)
        assert np.all(cache.activations[1] == 0.5)

    def test_relu_gates_negative_input(self):
        net = DenseNetwork([
            make_layer([[1.0]], [0.0], "relu"),
            make_layer([[1.0]], [0.0], "relu"),
        ])
        out, _ = forward(net, [[-3.0]])
        assert out[0][0] == 0.0

    def test_matches_scalar_oracle(self):
        for trial in range(10):
            gen = Xorshift64Star(derive_seed(600, trial))
            widths = [1 + gen.below(6) for _ in range(1 + gen.below(4) + 1)]
            acts = [("relu", "sigmoid", "linear")[gen.below(3)] for _ in range(len(widths) - 1)]
            specs = [LayerSpec(widths[i], widths[i + 1], acts[i]) for i in range(len(widths) - 1)]
            net = build_network(specs, seed=trial)
            X = np.array([[gen.uniform(-2, 2) for _ in range(widths[0])] for _ in range(4)])
            got, _ = forward(net, X)
            want = oracle_forward(net, X)
            assert np.all(np.abs(got - want) <= 1e-9 * np.maximum(1.0, np.abs(want)))

    def test_shape_conservation(self):
        net = build_autoencoder(seed=7)
        for n in (1, 3, 17):
            out, cache = forward(net, np.zeros((n, 2)))
            assert out.shape == (n, 1)
            widths = net.widths()[1:]
            assert [a.shape for a in cache.activations] == [(n, w) for w in widths]
            assert [z.shape for z in cache.pre_activations] == [(n, w) for w in widths]

    def test_wrong_width_rejected(self):
        net = build_autoencoder(seed=7)
        with pytest.raises(ShapeMismatch):
            forward(net, np.zeros((4, 3)))

    def test_non_finite_rejected(self):
        net = build_autoencoder(seed=7)
        with pytest.raises(NonFiniteInput):
            forward(net, [[np.nan, 0.0]])

    def test_latent_layer_in_unit_interval(self):
        net = build_autoencoder(seed=7)
        gen = Xorshift64Star(8)
        X = np.array([[gen.uniform(-5, 5), gen.uniform(-5, 5)] for _ in range(64)])
        _, cache = forward(net, X)
        latent = cache.activations[3]
        assert np.all(latent > 0.0)
        assert np.all(latent < 1.0)


class TestMseLoss:
    def test_zero_when_equal(self):
        x = np.arange(6.0).reshape(3, 2)
        assert mse_loss(x, x.copy()) == 0.0

    def test_constant_offset(self):
        pred = np.full((4, 2), 3.0)
        target = np.full((4, 2), 1.0)
        assert mse_loss(pred, target) == 4.0

    def test_matches_direct_summation(self):
        gen = Xorshift64Star(77)
        pred = np.array([[gen.uniform(-2, 2) for _ in range(3)] for _ in range(5)])
        target = np.array([[gen.uniform(-2, 2) for _ in range(3)] for _ in range(5)])
        direct = sum(
            (float(pred[i, j]) - float(target[i, j])) ** 2 for i in range(5) for j in range(3)
        ) / 15.0
        assert mse_loss(pred, target) == pytest.approx(direct, abs=1e-14)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            mse_loss(np.zeros((2, 2)), np.zeros((2, 3)))


class TestBackward:
    def test_zero_error_gives_zero_gradients(self):
        net = build_autoencoder(2, (4, 3), 2, 1, seed=7)
        X = np.array([[0.3, -0.2], [1.0, 0.5]])
        out, cache = forward(net, X)
        grads = backward(net, cache, out.copy())
        for dw, db in grads:
            assert np.all(dw == 0.0)
            assert np.all(db == 0.0)

    def test_single_linear_layer_closed_form(self):
        w, b, x, y = 0.7, -0.3, 1.9, 0.25
        net = DenseNetwork([make_layer([[w]], [b], "linear")])
        _, cache = forward(net, [[x]])
        (dw, db), = backward(net, cache, [[y]])
        err = w * x + b - y
        assert dw[0][0] == pytest.approx(2.0 * err * x, rel=1e-14)
        assert db[0] == pytest.approx(2.0 * err, rel=1e-14)

    def test_target_shape_mismatch(self):
        net = build_autoencoder(seed=7)
        _, cache = forward(net, np.zeros((3, 2)))
        with pytest.raises(ShapeMismatch):
            backward(net, cache, np.zeros((4, 1)))

    def test_canonical_net_matches_finite_differences(self):
        net = build_autoencoder(seed=3)
        gen = Xorshift64Star(92)
        X = np.array([[gen.uniform(-1, 1), gen.uniform(-1, 1)] for _ in range(8)])
        y = np.array([[float(gen.below(4))] for _ in range(8)])
        # central differences are only a valid oracle away from relu kinks:
        # every relu pre-activation must clear the 1e-5 step by a wide margin
        _, cache = forward(net, X)
        margin = min(
            float(np.min(np.abs(z)))
            for z, layer in zip(cache.pre_activations, net.layers)
            if layer.spec.activation == "relu"
        )
        assert margin >= 1e-4
        analytic = flat_gradients(net, X, y)
        numeric = numeric_gradients(net, X, y)
        for a, n in zip(analytic, numeric):
            assert np.all(np.abs(a - n) <= np.maximum(1e-4 * np.abs(n), 1e-7))


class TestAdam:
    def test_zero_gradient_fixed_point(self):
        params = [np.array([1.0, -2.0]), np.array([[3.0]])]
        state = AdamState(params)
        before = [p.copy() for p in params]
        adam_step(params, [np.zeros(2), np.zeros((1, 1))], state)
        assert state.t == 1
        for p, b in zip(params, before):
            assert np.array_equal(p, b)

    def test_first_step_magnitude_is_lr(self):
        g = 0.37
        params = [np.array([5.0])]
        state = AdamState(params)
        adam_step(params, [np.array([g])], state)
        # t=1: m_hat = g, v_hat = g^2, update = -lr * g / (|g| + eps)
        expected = 5.0 - 0.001 * g / (abs(g) + 1e-8)
        assert params[0][0] == pytest.approx(expected, abs=5e-15)
        assert abs(5.0 - params[0][0]) == pytest.approx(0.001, rel=1e-6)

    def test_two_steps_match_unrolled_recurrence(self):
        g1, g2 = 0.4, -1.3
        lr, b1, b2, eps = 0.001, 0.9, 0.999, 1e-8
        params = [np.array([2.0])]
        state = AdamState(params)
        adam_step(params, [np.array([g1])], state)
        adam_step(params, [np.array([g2])], state)

        p = 2.0
        m = v = 0.0
        for t, g in ((1, g1), (2, g2)):
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            m_hat = m / (1 - b1**t)
            v_hat = v / (1 - b2**t)
            p -= lr * m_hat / (math.sqrt(v_hat) + eps)
        assert params[0][0] == pytest.approx(p, abs=1e-12)
        assert state.t == 2

    def test_second_moments_non_negative(self):
        params = [np.array([0.0, 0.0])]
        state = AdamState(params)
        adam_step(params, [np.array([-3.0, 2.0])], state)
        assert np.all(state.v[0] >= 0.0)
        assert state.m[0].shape == params[0].shape

    def test_shape_mismatch(self):
        params = [np.zeros(2)]
        state = AdamState(params)
        with pytest.raises(ShapeMismatch):
            adam_step(params, [np.zeros(3)], state)
        with pytest.raises(ShapeMismatch):
            adam_step(params, [np.zeros(2), np.zeros(1)], state)


class TestTrain:
    def test_already_fit_data_stays_at_zero(self):
        net = DenseNetwork([make_layer([[0.5, -0.25]], [0.1], "linear")])
        X = np.array([[1.0, 2.0], [0.0, -1.0], [3.0, 0.5]])
        y, _ = forward(net, X)
        history = train(net, X, y.copy(), epochs=1, batch_size=16, seed=7)
        assert history.losses[0] == pytest.approx(0.0, abs=1e-20)

    def test_history_length_and_type(self):
        net = build_autoencoder(2, (6, 4), 2, 1, seed=7)
        X = np.array([[0.1, 0.9], [0.4, -0.3], [0.7, 0.2]])
        y = np.array([[0.0], [1.0], [1.0]])
        history = train(net, X, y, epochs=5, batch_size=8, seed=7)
        assert isinstance(history, TrainHistory)
        assert len(history.losses) == 5
        assert all(loss >= 0.0 for loss in history.losses)
        assert history.final_loss() == history.losses[-1]

    def test_oversized_batch_equals_exact_batch(self):
        X = np.array([[0.1 * i, 0.05 * i] for i in range(10)])
        y = np.array([[float(i % 3)] for i in range(10)])
        a = build_autoencoder(2, (5,), 2, 1, seed=9)
        b = build_autoencoder(2, (5,), 2, 1, seed=9)
        train(a, X, y, epochs=20, batch_size=1024, seed=7)
        train(b, X, y, epochs=20, batch_size=10, seed=7)
        for la, lb in zip(a.layers, b.layers):
            assert np.array_equal(la.weights, lb.weights)
            assert np.array_equal(la.biases, lb.biases)

    def test_minibatch_training_deterministic(self):
        X = np.array([[0.1 * i, -0.03 * i] for i in range(20)])
        y = np.array([[float(i % 4)] for i in range(20)])
        results = []
        for _ in range(2):
            net = build_autoencoder(2, (8, 4), 4, 1, seed=5)
            history = train(net, X, y, epochs=12, batch_size=6, seed=5)
            results.append((history.losses, [layer.weights.copy() for layer in net.layers]))
        assert results[0][0] == results[1][0]
        for wa, wb in zip(results[0][1], results[1][1]):
            assert np.array_equal(wa, wb)

    def test_descent_on_linear_target(self):
        gen = Xorshift64Star(13)
        X = np.array([[gen.uniform(0, 1), gen.uniform(-1, 1)] for _ in range(30)])
        y = (X @ np.array([[1.5], [-0.75]])) + 0.25
        net = build_autoencoder(seed=7)
        history = train(net, X, y, epochs=1000, batch_size=1024, seed=7)
        assert history.losses[-1] < history.losses[0]
        assert history.losses[-1] < 0.05

    def test_empty_dataset(self):
        net = build_autoencoder(seed=7)
        with pytest.raises(EmptyDataset):
            train(net, np.zeros((0, 2)), np.zeros((0, 1)), epochs=1, batch_size=4, seed=7)

    def test_mismatched_lengths(self):
        net = build_autoencoder(seed=7)
        with pytest.raises(ShapeMismatch):
            train(net, np.zeros((3, 2)), np.zeros((2, 1)), epochs=1, batch_size=4, seed=7)


class TestRoundLabels:
    def test_half_to_even_and_clamp(self):
        raw = [0.5, 1.5, -0.5, -1.5, 7.9, -9.2, 0.49999]
        assert list(round_labels(raw, 4)) == [0, 2, 0, 2, 3, 3, 0]

    def test_num_clusters_validation(self):
        with pytest.raises(ValueError):
            round_labels([0.1], 1)

    def test_predict_labels_through_identity_net(self):
        net = DenseNetwork([make_layer([[1.0]], [0.0], "linear")])
        raw = [[0.72130698], [-0.00018404983], [2.4604988], [3.0150795], [0.99868220]]
        assert list(predict_labels(net, raw, 4)) == [1, 0, 2, 3, 1]

    def test_predict_labels_needs_single_output(self):
        net = DenseNetwork([make_layer(np.zeros((2, 2)), np.zeros(2), "linear")])
        with pytest.raises(ShapeMismatch):
            predict_labels(net, [[1.0, 2.0]], 4)


class TestModelFile:
    def test_round_trip_is_bitwise(self, tmp_path):
        net = build_autoencoder(2, (7, 3), 4, 1, seed=21)
        path = tmp_path / "model.tscnet"
        save_model(net, path)
        loaded = load_model(path)
        assert loaded.widths() == net.widths()
        for la, lb in zip(net.layers, loaded.layers):
            assert la.spec == lb.spec
            assert np.array_equal(la.weights, lb.weights)
            assert np.array_equal(la.biases, lb.biases)
        X = np.array([[0.123, -4.56], [7.0, 0.0]])
        assert np.array_equal(forward(net, X)[0], forward(loaded, X)[0])

    def test_header_first_line(self, tmp_path):
        net = build_autoencoder(1, [1], 2, 1, seed=7)
        path = tmp_path / "model.tscnet"
        save_model(net, path)
        assert path.read_text(encoding="utf-8").splitlines()[0] == "tscnet v1"

    def test_missing_header(self, tmp_path):
        path = tmp_path / "bad.tscnet"
        path.write_text("nope v9\nlayers 1\n", encoding="utf-8")
        with pytest.raises(ModelFormatError):
            load_model(path)

    def test_truncated_file(self, tmp_path):
        net = build_autoencoder(1, [1], 2, 1, seed=7)
        path = tmp_path / "model.tscnet"
        save_model(net, path)
        lines = path.read_text(encoding="utf-8").splitlines()
        path.write_text("\n".join(lines[:-2]) + "\n", encoding="utf-8")
        with pytest.raises(ModelFormatError):
            load_model(path)

    def test_bad_float(self, tmp_path):
        net = build_autoencoder(1, [1], 2, 1, seed=7)
        path = tmp_path / "model.tscnet"
        save_model(net, path)
        text = path.read_text(encoding="utf-8")
        first_value = text.splitlines()[3]
        path.write_text(text.replace(first_value, "not-a-number", 1), encoding="utf-8")
        with pytest.raises(ModelFormatError):
            load_model(path)

    def test_trailing_garbage(self, tmp_path):
        net = build_autoencoder(1, [1], 2, 1, seed=7)
        path = tmp_path / "model.tscnet"
        save_model(net, path)
        path.write_text(path.read_text(encoding="utf-8") + "0.0 0.0\n", encoding="utf-8")
        with pytest.raises(ModelFormatError):
            load_model(path)

    def test_bad_activation_tag(self, tmp_path):
        path = tmp_path / "bad.tscnet"
        path.write_text("tscnet v1\nlayers 1\nlayer 1 1 softmax\n0.0\n0.0\n", encoding="utf-8")
        with pytest.raises(ModelFormatError):
            load_model(path)


@settings(deadline=None, max_examples=50)
@given(st.lists(st.integers(min_value=1, max_value=12), min_size=2, max_size=6))
def test_parameter_count_formula(widths):
    specs = [LayerSpec(widths[i], widths[i + 1], "relu") for i in range(len(widths) - 1)]
    net = build_network(specs, seed=1)
    hand = sum(widths[i] * widths[i + 1] + widths[i + 1] for i in range(len(widths) - 1))
    assert count_parameters(net) == hand


@settings(deadline=None, max_examples=25)
@given(
    st.integers(min_value=1, max_value=9),
    st.integers(min_value=0, max_value=10**6),
)
def test_latent_always_in_unit_interval(batch, seed):
    # closed bounds: extreme pre-activations round the sigmoid to exactly 0 or 1
    gen = Xorshift64Star(seed)
    net = build_autoencoder(2, (5,), 3, 1, seed=seed & 0xFFFF)
    X = np.array([[gen.uniform(-100, 100), gen.uniform(-100, 100)] for _ in range(batch)])
    _, cache = forward(net, X)
    latent = cache.activations[1]
    assert np.all((latent >= 0.0) & (latent <= 1.0))
