import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jd2p.datasets import gen_synthetic
from jd2p.learners import (
    LinearSvm,
    Mlp,
    TrainSpec,
    cross_entropy_loss,
    init_mlp,
    load_model,
    loss_and_gradients,
    mlp_posterior,
    save_model,
    softmax,
    svm_predict,
    train_mlp,
    train_svm,
)

SPEC = TrainSpec(slack_weight=1.0, epochs=10, batch_size=64, learning_rate=0.01, seed=3)


def blobs(seed=1, separation=2.0, per_class=100):
    return gen_synthetic([[-separation, 0.0], [separation, 0.0]], np.eye(2),
                         [per_class, per_class], seed=seed)


class TestTrainSvm:
    def test_separable_pair(self):
        svm = train_svm([[-1.0, 0.0], [1.0, 0.0]], [0, 1], SPEC)
        assert list(svm_predict(svm, np.array([[-1.0, 0.0], [1.0, 0.0]]))) == [0, 1]

    def test_label_flip_negates_decision(self):
        ds = blobs()
        svm = train_svm(ds.data, ds.labels, SPEC)
        flipped = train_svm(ds.data, 1 - ds.labels, SPEC)
        np.testing.assert_array_equal(flipped.weights, -svm.weights)
        assert flipped.offset == -svm.offset

    def test_blob_accuracy(self):
        ds = blobs()
        svm = train_svm(ds.data, ds.labels, SPEC)
        assert np.mean(svm_predict(svm, ds.data) == ds.labels) >= 0.95

    def test_single_class_rejected(self):
        with pytest.raises(ValueError, match="degenerate"):
            train_svm([[0.0, 1.0], [1.0, 0.0]], [0, 0], SPEC)

    def test_final_objective_not_worse(self):
        ds = blobs(seed=5)
        svm = train_svm(ds.data, ds.labels, SPEC)
        assert svm.objective_history[-1] <= svm.objective_history[0]

    def test_objective_checkpoints_non_increasing(self):
        ds = blobs(seed=9, separation=0.7)
        svm = train_svm(ds.data, ds.labels, SPEC)
        history = np.array(svm.objective_history)
        assert np.all(np.diff(history) <= 1e-9)

    def test_input_scaling_preserves_predictions(self):
        ds = blobs(seed=7)
        svm = train_svm(ds.data, ds.labels, SPEC)
        scaled = train_svm(3.0 * ds.data, ds.labels, SPEC)
        np.testing.assert_array_equal(svm_predict(svm, ds.data),
                                      svm_predict(scaled, 3.0 * ds.data))

    def test_determinism(self):
        ds = blobs(seed=2)
        a = train_svm(ds.data, ds.labels, SPEC)
        b = train_svm(ds.data, ds.labels, SPEC)
        np.testing.assert_array_equal(a.weights, b.weights)
        assert a.offset == b.offset


class TestSvmPredict:
    def test_boundary_ties_to_class_zero(self):
        svm = LinearSvm(weights=np.array([3.0, 4.0]), offset=-10.0, depth=2)
        assert svm_predict(svm, [2.0, 1.0]) == 0

    def test_positive_side(self):
        svm = LinearSvm(weights=np.array([1.0, 0.0]), offset=0.0, depth=2)
        assert svm_predict(svm, [5.0, 9.0]) == 0

    def test_negative_side(self):
        svm = LinearSvm(weights=np.array([1.0, 0.0]), offset=0.0, depth=2)
        assert svm_predict(svm, [-5.0, 9.0]) == 1


def three_blobs(seed=5):
    return gen_synthetic([[-6.0, 0.0], [6.0, 0.0], [0.0, 6.0]], np.eye(2),
                         [167, 167, 166], seed=seed)


class TestTrainMlp:
    def test_blob_accuracy(self):
        ds = three_blobs()
        mlp = train_mlp(ds.data, ds.labels, TrainSpec(epochs=10, seed=7),
                        hidden=(32, 16), num_classes=3)
        acc = np.mean(np.argmax(mlp_posterior(mlp, ds.data), axis=-1) == ds.labels)
        assert acc >= 0.90

    def test_zero_epochs_unchanged(self):
        ds = three_blobs()
        spec = TrainSpec(epochs=0, seed=7)
        mlp = train_mlp(ds.data, ds.labels, spec, hidden=(8,), num_classes=3)
        fresh = init_mlp((2, 8, 3), seed=spec.seed)
        for a, b in zip(mlp.weights, fresh.weights):
            np.testing.assert_array_equal(a, b)
        assert mlp.epoch_losses == ()

    def test_epoch_losses_recorded(self):
        ds = three_blobs()
        mlp = train_mlp(ds.data, ds.labels, TrainSpec(epochs=4, seed=7),
                        hidden=(16,), num_classes=3)
        assert len(mlp.epoch_losses) == 4

    def test_determinism(self):
        ds = three_blobs()
        a = train_mlp(ds.data, ds.labels, TrainSpec(epochs=3, seed=9), hidden=(8,))
        b = train_mlp(ds.data, ds.labels, TrainSpec(epochs=3, seed=9), hidden=(8,))
        for wa, wb in zip(a.weights, b.weights):
            np.testing.assert_array_equal(wa, wb)


def finite_difference_check(mlp, X, y, step=1e-6):
    _, grads_w, grads_b = loss_and_gradients(mlp, X, y)
    worst = 0.0
    rng = np.random.default_rng(0)
    for li in range(len(mlp.weights)):
        shape = mlp.weights[li].shape
        picks = [(int(rng.integers(shape[0])), int(rng.integers(shape[1]))) for _ in range(4)]
        for idx in picks:
            plus = [w.copy() for w in mlp.weights]
            minus = [w.copy() for w in mlp.weights]
            plus[li][idx] += step
            minus[li][idx] -= step
            up = cross_entropy_loss(Mlp(tuple(plus), mlp.biases), X, y)
            down = cross_entropy_loss(Mlp(tuple(minus), mlp.biases), X, y)
            numeric = (up - down) / (2 * step)
            worst = max(worst, abs(numeric - grads_w[li][idx]) / max(1e-8, abs(numeric)))
        bias_idx = int(rng.integers(mlp.biases[li].shape[0]))
        plus_b = [b.copy() for b in mlp.biases]
        minus_b = [b.copy() for b in mlp.biases]
        plus_b[li][bias_idx] += step
        minus_b[li][bias_idx] -= step
        up = cross_entropy_loss(Mlp(mlp.weights, tuple(plus_b)), X, y)
        down = cross_entropy_loss(Mlp(mlp.weights, tuple(minus_b)), X, y)
        numeric = (up - down) / (2 * step)
        worst = max(worst, abs(numeric - grads_b[li][bias_idx]) / max(1e-8, abs(numeric)))
    return worst


class TestGradients:
    def test_gradient_check_at_random_init(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((5, 7))
        y = rng.integers(0, 3, 5)
        mlp = init_mlp((7, 8, 6, 3), seed=2)
        assert finite_difference_check(mlp, X, y) < 1e-4

    def test_gradient_check_after_training(self):
        ds = three_blobs()
        mlp = train_mlp(ds.data, ds.labels, TrainSpec(epochs=2, seed=7),
                        hidden=(8, 6), num_classes=3)
        rng = np.random.default_rng(1)
        idx = rng.choice(ds.num_samples, 5, replace=False)
        assert finite_difference_check(mlp, ds.data[idx], ds.labels[idx]) < 1e-4


class TestPosterior:
    def test_sums_to_one(self):
        mlp = init_mlp((4, 8, 5), seed=0)
        x = np.random.default_rng(2).standard_normal((10, 4))
        post = mlp_posterior(mlp, x)
        np.testing.assert_allclose(post.sum(axis=-1), 1.0, atol=1e-6)
        assert np.all(post >= 0.0)

    def test_zero_weights_uniform(self):
        mlp = Mlp(weights=(np.zeros((4, 6)), np.zeros((6, 5))),
                  biases=(np.zeros(6), np.zeros(5)))
        np.testing.assert_allclose(mlp_posterior(mlp, np.ones(4)), np.full(5, 0.2),
                                   atol=1e-12)

    def test_trained_blob_center_argmax(self):
        ds = three_blobs()
        mlp = train_mlp(ds.data, ds.labels, TrainSpec(epochs=10, seed=7),
                        hidden=(32, 16), num_classes=3)
        for center, label in [([-6.0, 0.0], 0), ([6.0, 0.0], 1), ([0.0, 6.0], 2)]:
            assert int(np.argmax(mlp_posterior(mlp, np.array(center)))) == label

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.floats(-50, 50))
    def test_softmax_shift_invariance(self, seed, shift):
        logits = np.random.default_rng(seed).standard_normal(6)
        np.testing.assert_allclose(softmax(logits + shift), softmax(logits), atol=1e-12)


class TestSerialization:
    def test_svm_round_trip(self, tmp_path):
        ds = blobs()
        svm = train_svm(ds.data, ds.labels, SPEC)
        path = tmp_path / "svm.npz"
        save_model(svm, path)
        loaded = load_model(path)
        np.testing.assert_array_equal(loaded.weights, svm.weights)
        assert loaded.offset == svm.offset and loaded.depth == svm.depth
        assert loaded.objective_history == svm.objective_history

    def test_mlp_round_trip(self, tmp_path):
        ds = three_blobs()
        mlp = train_mlp(ds.data, ds.labels, TrainSpec(epochs=2, seed=4), hidden=(8,))
        path = tmp_path / "mlp.npz"
        save_model(mlp, path)
        loaded = load_model(path)
        for a, b in zip(loaded.weights, mlp.weights):
            np.testing.assert_array_equal(a, b)
        for a, b in zip(loaded.biases, mlp.biases):
            np.testing.assert_array_equal(a, b)
        assert loaded.epoch_losses == mlp.epoch_losses

    def test_unknown_type_rejected(self, tmp_path):
        with pytest.raises(TypeError):
            save_model(object(), tmp_path / "bad.npz")


def test_train_spec_validation():
    with pytest.raises(ValueError):
        TrainSpec(slack_weight=0.0)
    with pytest.raises(ValueError):
        TrainSpec(epochs=-1)
    with pytest.raises(ValueError):
        TrainSpec(learning_rate=0.0)
