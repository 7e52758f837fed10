"""Adapt FC1 to a hardware conv layer.

Hardware features (conv through a perturbed bench, then crop/bn/pool) are
paired with the FC1 pre-activations the simulated network produces on the
same images. FC1 is refit by least squares with Adam; FC2 is left alone,
so hardware features land where the trained output layer expects them.
"""
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import datasets_io
from .fourier_cnn import Adam, accuracy_from_features, conv_features


@dataclass
class FeaturePairSet:
    hardware: np.ndarray      # (n, features) FC1 inputs from the hardware path
    target: np.ndarray        # (n, hidden) simulated FC1 pre-activations
    labels: np.ndarray
    indices: np.ndarray       # rows of the training split used

    def __post_init__(self):
        if not (len(self.hardware) == len(self.target) == len(self.labels) == len(self.indices)):
            raise ValueError("pair arrays must have equal length")

    @property
    def sample_count(self):
        return len(self.hardware)

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        datasets_io.write_raster(directory / "hardware.aoff", self.hardware)
        datasets_io.write_raster(directory / "target.aoff", self.target)
        (directory / "pairs.json").write_text(json.dumps(
            {"labels": self.labels.tolist(), "indices": self.indices.tolist()}))

    @classmethod
    def load(cls, directory):
        directory = Path(directory)
        meta = json.loads((directory / "pairs.json").read_text())
        return cls(np.atleast_2d(datasets_io.read_raster(directory / "hardware.aoff")),
                   np.atleast_2d(datasets_io.read_raster(directory / "target.aoff")),
                   np.array(meta["labels"], dtype=np.int64),
                   np.array(meta["indices"], dtype=np.int64))


def collect_pairs(model, simulation_config, hardware_config, dataset, n, seed=0,
                  expansion=4, hardware_features=None):
    """Draw ``n`` training images and record (hardware features, simulated
    FC1 pre-activations).

    ``simulation_config=None`` uses the ideal conv path the network was
    trained on. ``hardware_features`` may hold precomputed hardware
    features for the whole training split.
    """
    pool = len(dataset.train_x)
    if n > pool:
        raise ValueError(f"requested {n} pairs but the training split has {pool} samples")
    idx = np.sort(np.random.default_rng(seed).permutation(pool)[:n])
    x = dataset.train_x[idx]
    if hardware_features is not None:
        hw = hardware_features[idx]
    else:
        hw = conv_features(model, x, "physical", hardware_config, seed=seed, expansion=expansion)
    mode = "ideal" if simulation_config is None else "physical"
    sim = conv_features(model, x, mode, simulation_config, seed=seed, expansion=expansion)
    return FeaturePairSet(hw, model.fc1(sim), dataset.train_y[idx], idx)


def fc1_loss(w, b, pairs):
    err = pairs.hardware @ w.T + b - pairs.target
    return float(np.mean(err ** 2))


def finetune_fc1(model, pairs, epochs=20, lr=1e-3, batch_size=64, seed=0):
    """Return a copy of ``model`` whose FC1 minimises the mean squared
    error to the simulated pre-activations. Also returns the per-epoch loss."""
    if pairs.sample_count == 0:
        raise ValueError("no feature pairs")
    out = model.copy()
    params = {"fc1_w": out.params["fc1_w"].copy(), "fc1_b": out.params["fc1_b"].copy()}
    opt = Adam(params, lr=lr)
    rng = np.random.default_rng(seed)
    hw = pairs.hardware.astype(params["fc1_w"].dtype)
    tgt = pairs.target.astype(params["fc1_w"].dtype)
    hidden = tgt.shape[1]
    history = [fc1_loss(params["fc1_w"], params["fc1_b"], pairs)]
    for _ in range(epochs):
        order = rng.permutation(len(hw))
        for i in range(0, len(hw), batch_size):
            j = order[i:i + batch_size]
            err = hw[j] @ params["fc1_w"].T + params["fc1_b"] - tgt[j]
            d = 2.0 * err / (len(j) * hidden)
            opt.step(params, {"fc1_w": d.T @ hw[j], "fc1_b": d.sum(axis=0)})
        history.append(fc1_loss(params["fc1_w"], params["fc1_b"], pairs))
    out.params.update(params)
    return out, history


def accuracy_vs_samples(model, simulation_config, hardware_config, dataset, sample_grid,
                        seed=0, epochs=20, expansion=4, test_features=None, train_features=None):
    """Hardware-path test accuracy after fine-tuning on each sample count.

    ``test_features`` (hardware features of the test set) and
    ``train_features`` (of the training split) may be passed to avoid
    recomputing them.
    """
    if test_features is None:
        test_features = conv_features(model, dataset.test_x, "physical", hardware_config,
                                      seed=seed + 1, expansion=expansion)
    curve = []
    for n in sample_grid:
        if n == 0:
            tuned = model
        else:
            pairs = collect_pairs(model, simulation_config, hardware_config, dataset, n, seed,
                                  expansion, train_features)
            tuned, _ = finetune_fc1(model, pairs, epochs=epochs, seed=seed)
        curve.append((int(n), accuracy_from_features(tuned, test_features, dataset.test_y)))
    return curve
