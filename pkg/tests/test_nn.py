import json

import numpy as np
import pytest

from radarjam.nn import (
    MLP,
    Adam,
    MlpSpec,
    NonFiniteLossError,
    ReservoirBuffer,
    fit,
    load_checkpoint,
    sample_batch,
    save_checkpoint,
    softmax,
    train_step,
)


def max_relative_gradient_error(net, x, y, loss, weights=None, mask=None, h=1e-6):
    """Largest |analytic - numeric| / (|analytic| + |numeric|) over all parameters."""
    _, grads = net.loss_and_grads(x, y, loss, weights, mask)
    worst = 0.0
    for param, grad in zip(net.params, grads):
        flat, gflat = param.reshape(-1), grad.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            up, _ = net.loss_and_grads(x, y, loss, weights, mask)
            flat[i] = keep - h
            down, _ = net.loss_and_grads(x, y, loss, weights, mask)
            flat[i] = keep
            numeric = (up - down) / (2 * h)
            denom = max(abs(numeric) + abs(gflat[i]), 1e-7)
            worst = max(worst, abs(numeric - gflat[i]) / denom)
    return worst


@pytest.mark.parametrize("depth", [3, 5, 8])
@pytest.mark.parametrize("head, loss", [("identity", "mse"), ("softmax", "cross_entropy")])
def test_gradients_match_finite_differences(depth, head, loss):
    rng = np.random.default_rng(depth)
    widths = (6,) + (5,) * (depth - 2) + (4,)
    net = MLP(MlpSpec(widths, head, seed=depth))
    x = rng.normal(size=(7, 6))
    y = rng.dirichlet(np.ones(4), size=7) if loss == "cross_entropy" else rng.normal(size=(7, 4))
    w = rng.uniform(0.5, 2.0, size=7)
    assert max_relative_gradient_error(net, x, y, loss, weights=w) < 1e-4


def test_masked_mse_gradient():
    rng = np.random.default_rng(0)
    net = MLP(MlpSpec((5, 8, 3), "identity", 1))
    x, y = rng.normal(size=(6, 5)), rng.normal(size=(6, 3))
    mask = rng.random((6, 3)) < 0.5
    mask[0] = True
    assert max_relative_gradient_error(net, x, y, "mse", mask=mask) < 1e-4
    # masked-out targets do not matter
    y2 = np.where(mask, y, 1e6)
    assert net.loss_and_grads(x, y, "mse", mask=mask)[0] == net.loss_and_grads(x, y2, "mse", mask=mask)[0]


def test_softmax_head_outputs_distributions():
    net = MLP(MlpSpec((4, 6, 3), "softmax", 0))
    p = net(np.random.default_rng(0).normal(size=(10, 4)))
    np.testing.assert_allclose(p.sum(axis=1), 1.0)
    np.testing.assert_allclose(softmax(np.array([1000.0, 1000.0])), [0.5, 0.5])


def test_checkpoint_round_trip_is_bit_exact(tmp_path):
    net = MLP(MlpSpec((288, 128, 64, 27), "softmax", 42))
    path = tmp_path / "net.json"
    save_checkpoint(net, path)
    back = load_checkpoint(path)
    assert back.spec == net.spec
    for a, b in zip(net.params, back.params):
        assert a.dtype == b.dtype and np.array_equal(a, b)
    x = np.random.default_rng(0).random((5, 288))
    assert np.array_equal(net(x), back(x))
    data = json.loads(path.read_text())
    assert data["format"] == "radarjam-mlp" and data["version"] == 1


def test_checkpoint_rejects_other_formats(tmp_path):
    path = tmp_path / "x.json"
    path.write_text(json.dumps({"format": "other"}))
    with pytest.raises(ValueError):
        load_checkpoint(path)


def test_initialization_is_seeded_and_fan_in_scaled():
    a = MLP(MlpSpec((100, 10, 2), seed=5))
    b = MLP(MlpSpec((100, 10, 2), seed=5))
    assert all(np.array_equal(p, q) for p, q in zip(a.params, b.params))
    assert np.abs(a.weights[0]).max() <= 0.1


def test_spec_validation():
    with pytest.raises(ValueError):
        MlpSpec((4,))
    with pytest.raises(ValueError):
        MlpSpec((4, 0, 2))
    with pytest.raises(ValueError):
        MlpSpec((4, 2), head="tanh")


def test_training_reduces_loss():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(256, 3))
    y = np.stack([x[:, 0] - x[:, 1], x[:, 2] ** 2], axis=1)
    net = MLP(MlpSpec((3, 32, 2), seed=0))
    before = net.loss_and_grads(x, y, "mse")[0]
    fit(net, x, y, loss="mse", steps=2000, batch_size=64, lr=0.05, rng=rng)
    assert net.loss_and_grads(x, y, "mse")[0] < 0.2 * before


def test_adam_step_moves_parameters():
    net = MLP(MlpSpec((2, 3, 1), seed=0))
    before = [p.copy() for p in net.params]
    train_step(net, np.ones((4, 2)), np.zeros((4, 1)), optimizer=Adam(1e-2))
    assert any(not np.array_equal(a, b) for a, b in zip(before, net.params))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_loss_raises_with_context():
    net = MLP(MlpSpec((2, 1), seed=0))
    with pytest.raises(NonFiniteLossError, match="non-finite"):
        train_step(net, np.array([[np.inf, 0.0]]), np.zeros((1, 1)))


def test_reservoir_retention_is_uniform():
    # each stream position survives with probability capacity / stream length
    capacity, stream, reps = 20, 200, 4000
    rng = np.random.default_rng(123)
    hits = np.zeros(stream)
    for _ in range(reps):
        buf = ReservoirBuffer(capacity, rng)
        for start in range(0, stream, 37):
            buf.add_batch(np.arange(start, min(stream, start + 37)))
        hits[buf.contents()[0]] += 1
    expected = reps * capacity / stream
    chi2 = ((hits - expected) ** 2 / expected).sum()
    dof = stream - 1
    assert abs(chi2 - dof) < 3 * np.sqrt(2 * dof)
    assert hits.sum() == reps * capacity


def test_reservoir_single_adds_and_capacity():
    buf = ReservoirBuffer(3, seed=0)
    for i in range(10):
        buf.add((np.array([i, i]), float(i)))
    x, y = buf.contents()
    assert len(buf) == 3 and buf.count_seen == 10
    assert np.array_equal(x[:, 0], y.astype(int))
    empty = ReservoirBuffer(0)
    empty.add_batch(np.arange(5))
    assert len(empty) == 0 and empty.count_seen == 5
    with pytest.raises(ValueError):
        sample_batch(empty, 2, 0)


def test_sample_batch_is_reproducible():
    buf = ReservoirBuffer(10, seed=1)
    buf.add_batch(np.arange(10))
    assert np.array_equal(sample_batch(buf, 5, 9)[0], sample_batch(buf, 5, 9)[0])
