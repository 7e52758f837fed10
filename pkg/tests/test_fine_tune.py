import numpy as np
import pytest

from aofnn.datasets_io import LabeledSet
from aofnn.fine_tune import (FeaturePairSet, accuracy_vs_samples, collect_pairs, fc1_loss,
                             finetune_fc1)
from aofnn.fourier_cnn import TrainConfig, conv_features, train
from aofnn.optics import make_hardware_surrogate, nominal_config


def bars(n=160, seed=0):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n)
    x = np.zeros((n, 1, 8, 8), np.float32)
    for i, c in enumerate(y):
        pos = rng.integers(1, 7)
        if c:
            x[i, 0, :, pos] = 1
        else:
            x[i, 0, pos, :] = 1
    return LabeledSet(x[:96], y[:96], x[96:128], y[96:128], x[128:], y[128:], "bars")


@pytest.fixture(scope="module")
def setup():
    data = bars()
    model, _ = train(data, TrainConfig(epochs=2, batch_size=16, kernel_size=8, num_kernels=2,
                                       hidden_dim=8))
    return data, model


def test_pairs_come_from_train_split(setup):
    data, model = setup
    hw = make_hardware_surrogate(nominal_config(2), 0)
    pairs = collect_pairs(model, None, hw, data, 20, seed=1, expansion=2)
    assert pairs.sample_count == 20 and len(set(pairs.indices)) == 20
    assert pairs.indices.max() < len(data.train_x)
    np.testing.assert_array_equal(pairs.labels, data.train_y[pairs.indices])
    with pytest.raises(ValueError, match="96"):
        collect_pairs(model, None, hw, data, 97)


def test_identity_hardware_gives_zero_loss_and_frozen_fc2(setup, tmp_path):
    data, model = setup
    ideal = conv_features(model, data.train_x)
    pairs = collect_pairs(model, None, None, data, 40, hardware_features=ideal)
    assert fc1_loss(model.params["fc1_w"], model.params["fc1_b"], pairs) < 1e-10
    tuned, hist = finetune_fc1(model, pairs, epochs=3)
    assert hist[-1] < 1e-6
    for k in ("fc2_w", "fc2_b", "kernels"):
        assert tuned.params[k].tobytes() == model.params[k].tobytes()
    pairs.save(tmp_path / "p")
    back = FeaturePairSet.load(tmp_path / "p")
    np.testing.assert_array_equal(back.hardware, pairs.hardware.astype(np.float32))
    np.testing.assert_array_equal(back.indices, pairs.indices)


def test_finetune_reduces_loss_and_is_deterministic(setup):
    data, model = setup
    hw = make_hardware_surrogate(nominal_config(2), 3)
    feats = conv_features(model, data.train_x, "physical", hw, expansion=2)
    pairs = collect_pairs(model, None, hw, data, 64, hardware_features=feats)
    a, ha = finetune_fc1(model, pairs, epochs=10, lr=1e-2)
    b, hb = finetune_fc1(model, pairs, epochs=10, lr=1e-2)
    assert ha == hb and ha[-1] < ha[0]
    assert a.params["fc1_w"].tobytes() == b.params["fc1_w"].tobytes()
    assert a.params["fc2_w"].tobytes() == model.params["fc2_w"].tobytes()
    with pytest.raises(ValueError):
        finetune_fc1(model, FeaturePairSet(feats[:0], pairs.target[:0], pairs.labels[:0],
                                           pairs.indices[:0]))


def test_accuracy_vs_samples_curve(setup):
    data, model = setup
    hw = make_hardware_surrogate(nominal_config(2), 3)
    train_f = conv_features(model, data.train_x, "physical", hw, expansion=2)
    test_f = conv_features(model, data.test_x, "physical", hw, expansion=2)
    curve = accuracy_vs_samples(model, None, hw, data, [0, 32, 96], epochs=5,
                                test_features=test_f, train_features=train_f)
    assert [n for n, _ in curve] == [0, 32, 96]
    assert all(0 <= acc <= 1 for _, acc in curve)
