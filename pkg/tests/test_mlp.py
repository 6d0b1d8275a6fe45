import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trajset.errors import BadFile, DimensionMismatch, SingleClass
from trajset.fisher import FisherVector
from trajset.mlp import (
    TrainConfig,
    grad_check,
    init_model,
    loss_and_grads,
    predict,
    predict_labels,
    read_mlp,
    train,
    write_mlp,
)


def _separable(rng, n=10):
    x = rng.normal(size=(n, 2))
    x[: n // 2, 0] += 3.0
    x[n // 2 :, 0] -= 3.0
    return x, ["right"] * (n // 2) + ["left"] * (n - n // 2)


def test_separable_reaches_full_accuracy(rng):
    x, y = _separable(rng)
    model = train(x, y, TrainConfig(epochs=500, batch_size=4, learning_rate=0.05))
    assert predict_labels(model, x) == y
    assert model.labels == ("left", "right")
    assert np.isfinite(model.final_train_loss)


def test_zero_learning_rate_keeps_init(rng):
    x, y = _separable(rng)
    model = train(x, y, TrainConfig(learning_rate=0.0, epochs=3, seed=5), hidden_dim=8)
    ref = init_model(2, 2, 8, seed=5)
    for name in ("W1", "b1", "W2", "b2"):
        np.testing.assert_array_equal(getattr(model, name), getattr(ref, name).astype(np.float32))


def test_training_deterministic(rng):
    x, y = _separable(rng, 20)
    a = train(x, y, TrainConfig(epochs=30, seed=3), hidden_dim=10)
    b = train(x, y, TrainConfig(epochs=30, seed=3), hidden_dim=10)
    for name in ("W1", "b1", "W2", "b2"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    assert a.loss_history == b.loss_history


def test_train_errors(rng):
    with pytest.raises(SingleClass):
        train(rng.normal(size=(4, 3)), ["a"] * 4)
    with pytest.raises(DimensionMismatch):
        train([np.zeros(3), np.zeros(4)], ["a", "b"])


def test_train_accepts_fisher_vectors(rng):
    fvs = [FisherVector(v) for v in rng.normal(size=(6, 5))]
    model = train(fvs, ["a", "b"] * 3, TrainConfig(epochs=2), hidden_dim=4)
    assert predict(model, fvs[0]).shape == (2,)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 6))
def test_probabilities_simplex(seed, k):
    rng = np.random.default_rng(seed)
    model = init_model(7, k, 5, seed=seed)
    p = predict(model, rng.normal(scale=50, size=(9, 7)))
    assert np.all(p >= 0) and np.all(np.abs(p.sum(axis=1) - 1) < 1e-6)


def test_zero_weights_uniform():
    model = init_model(4, 5, 3)
    for name in ("W1", "b1", "W2", "b2"):
        getattr(model, name)[...] = 0.0
    np.testing.assert_allclose(predict(model, np.ones(4)), np.full(5, 0.2))


def test_logit_shift_invariance(rng):
    model = init_model(6, 4, 5, seed=2)
    x = rng.normal(size=(8, 6))
    p = predict(model, x)
    shifted = model.copy()
    shifted.b2 = shifted.b2 + 3.75
    q = predict(shifted, x)
    np.testing.assert_allclose(q, p, rtol=1e-12)
    assert np.array_equal(np.argmax(p, axis=1), np.argmax(q, axis=1))


def test_predict_dim_mismatch():
    with pytest.raises(DimensionMismatch):
        predict(init_model(4, 2, 3), np.zeros(5))


def _small_problem(seed=0):
    rng = np.random.default_rng(seed)
    return init_model(20, 3, 7, seed=seed), rng.normal(size=(12, 20)), rng.integers(0, 3, size=12)


def test_grad_check_small_model():
    model, x, y = _small_problem()
    assert grad_check(model, x, y, epsilon=1e-5, n_coords=100) < 1e-4
    assert grad_check(model, x, y, epsilon=1e-5, n_coords=10_000, l2=1e-3) < 1e-4


@pytest.mark.parametrize("eps", [1e-7, 1e-3])
def test_grad_check_epsilon_bounds(eps):
    model, x, y = _small_problem(1)
    assert grad_check(model, x, y, epsilon=eps) < 1e-3


def test_grad_check_identity_activation():
    rng = np.random.default_rng(4)
    model = init_model(20, 3, 7, activation="identity", seed=4)
    assert grad_check(model, rng.normal(size=(12, 20)), rng.integers(0, 3, size=12), n_coords=500) < 1e-6


def test_grad_check_epsilon_range():
    model, x, y = _small_problem()
    for eps in (1e-8, 1e-2):
        with pytest.raises(ValueError):
            grad_check(model, x, y, epsilon=eps)


def test_loss_non_increasing_small_lr(rng):
    x = rng.normal(size=(16, 5))
    y = ["a", "b", "c", "d"] * 4
    cfg = TrainConfig(learning_rate=1e-4, epochs=20, batch_size=16, seed=0)
    model = train(x, y, cfg, hidden_dim=6)
    initial = train(x, y, TrainConfig(learning_rate=0.0, epochs=1, batch_size=16, seed=0), hidden_dim=6)
    h = [initial.final_train_loss] + model.loss_history
    assert all(b <= a for a, b in zip(h, h[1:]))


def test_loss_and_grads_shapes():
    model, x, y = _small_problem()
    loss, g = loss_and_grads(model, x, y)
    assert loss > 0
    assert {k: v.shape for k, v in g.items()} == {"W1": (7, 20), "b1": (7,), "W2": (3, 7), "b2": (3,)}


def test_mlp_file_roundtrip(tmp_path, rng):
    x, y = _separable(rng, 12)
    model = train(x, [s + "é" for s in y], TrainConfig(epochs=20), hidden_dim=9, activation="tanh")
    p = tmp_path / "m.mlp"
    write_mlp(p, model)
    back = read_mlp(p)
    for name in ("W1", "b1", "W2", "b2"):
        assert np.array_equal(getattr(back, name), getattr(model, name))
    assert back.labels == model.labels and back.activation == "tanh"
    assert np.array_equal(predict(back, x), predict(model, x))
    p.write_bytes(p.read_bytes()[:30])
    with pytest.raises(BadFile):
        read_mlp(p)
