"""Hybrid optical-electronic CNN with an amplitude-only Fourier layer.

Forward pass of one sample::

    x --pad--> X = dft2(x) --* mask_k--> idft2 --|.|^2--> sum over colour
      --crop--> batch-norm --2x2 max-pool--> flatten --> FC1 --> ReLU --> FC2

Masks live in the Fourier domain, authored ``dc_at_center``, and are the
quantised view of unconstrained real weights. Training always runs the
ideal FFT path; the physical path renders the same masks onto the bench of
:mod:`aofnn.optics`. Gradients are derived by hand (see ``backward``).
"""
import copy
import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from . import datasets_io
from .field_math import (center_crop, expand_pixels, fft2o, ifft2o,
                         superpixel_reduce, zero_pad_center)
from .metrics import accuracy, confusion
from .optics import FourFSystem

log = logging.getLogger(__name__)

BN_EPS = 1e-5
BN_MOMENTUM = 0.1
POOL = 2


# --------------------------------------------------------------------------
# Kernel quantisation
# --------------------------------------------------------------------------

def binarize(weights):
    """1 where the weight is strictly positive, else 0."""
    return (np.asarray(weights) > 0).astype(np.asarray(weights).dtype)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def quantize(weights, bits):
    """Map real weights to DMD-displayable mask values in [0, 1].

    ``bits=1`` binarises; ``bits=32`` returns ``sigmoid(weights)``; other
    depths round the sigmoid to the nearest of ``2**bits`` uniform levels.
    """
    if bits == 1:
        return binarize(weights)
    if bits not in (2, 8, 32):
        raise ValueError(f"unsupported kernel bit depth {bits}")
    s = sigmoid(np.asarray(weights))
    if bits == 32:
        return s
    levels = 2 ** bits - 1
    return np.floor(s * levels + 0.5) / levels


def quantize_backward(weights, bits, grad):
    """Straight-through: the rounding is skipped, the sigmoid is not."""
    if bits == 1:
        return grad
    s = sigmoid(np.asarray(weights))
    return grad * s * (1.0 - s)


# --------------------------------------------------------------------------
# Fourier convolution
# --------------------------------------------------------------------------

def fourier_conv_ideal(x, masks):
    """``y[b, k] = sum_c |idft2(dft2(x[b, c]) * ifftshift(masks[k]))|**2``.

    ``x`` is ``(batch, channels, n, n)``, ``masks`` is ``(kernels, n, n)``.
    Returns the maps and a cache for :func:`fourier_conv_backward`.
    """
    if x.shape[-2:] != masks.shape[-2:]:
        raise ValueError(f"kernel {masks.shape[-2:]} does not match input {x.shape[-2:]}")
    spectrum = fft2o(x)
    shifted = sfft.ifftshift(masks, axes=(-2, -1))
    field = ifft2o(spectrum[:, :, None] * shifted[None, None])
    maps = (field.real ** 2 + field.imag ** 2).sum(axis=1)
    return maps, (spectrum, field)


def fourier_conv_backward(dmaps, cache):
    """Gradient of the loss w.r.t. the ``dc_at_center`` masks.

    With ``g_z = 2 dY z`` the gradient w.r.t. the complex field, the
    unitary inverse transform pulls back through ``dft2``, and the real
    mask sees ``Re(conj(X) g_p)`` summed over samples and channels.
    """
    spectrum, field = cache
    g_field = 2.0 * dmaps[:, None] * field
    g_prod = fft2o(g_field)
    g_shifted = (spectrum.conj()[:, :, None] * g_prod).real.sum(axis=(0, 1))
    return sfft.fftshift(g_shifted, axes=(-2, -1))


def embed_masks(masks, size):
    """Place ``dc_at_center`` masks in the centre of a larger, otherwise
    opaque Fourier plane, keeping DC aligned."""
    n = masks.shape[-1]
    out = np.zeros(masks.shape[:-2] + (size, size))
    o = size // 2 - n // 2
    out[..., o:o + n, o:o + n] = masks
    return out


def fourier_conv_physical(x, masks, config, expansion=4, rng=None, bench=None):
    """Same maps as :func:`fourier_conv_ideal`, acquired through the bench.

    Each input is pixel-expanded by ``expansion`` so that its whole band
    fits inside the mask window, each channel is acquired separately and
    the camera frames are binned back and summed.
    """
    if x.shape[-2:] != masks.shape[-2:]:
        raise ValueError(f"kernel {masks.shape[-2:]} does not match input {x.shape[-2:]}")
    bench = FourFSystem(config) if bench is None else bench
    n = x.shape[-1]
    rendered = bench.render_mask(embed_masks(np.asarray(masks, dtype=np.float64), n * expansion))
    out = np.zeros((x.shape[0], masks.shape[0], n, n))
    for b in range(x.shape[0]):
        for c in range(x.shape[1]):
            pattern = expand_pixels(np.asarray(x[b, c], dtype=np.float64), expansion)
            frames = bench.propagate(pattern, rendered, rng=rng)
            out[b] += superpixel_reduce(frames, expansion)
    return out


@dataclass
class FourierKernelBank:
    """Unconstrained real weights and the bit depth they are displayed at."""
    weights: np.ndarray
    quant_bits: int = 1

    def __post_init__(self):
        self.weights = np.asarray(self.weights)
        if self.weights.ndim != 3:
            raise ValueError("weights must be (num_kernels, rows, cols)")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")
        if self.quant_bits not in (1, 2, 8, 32):
            raise ValueError(f"unsupported kernel bit depth {self.quant_bits}")

    @property
    def num_kernels(self):
        return self.weights.shape[0]

    def binarized(self):
        return binarize(self.weights)

    def masks(self):
        return quantize(self.weights, self.quant_bits)


def fourier_conv_forward(x, kernels, mode="ideal", config=None, expansion=4, rng=None):
    """Conv-layer maps for padded inputs ``(batch, channels, n, n)``.

    ``kernels`` is a :class:`FourierKernelBank` or an array of masks
    already in [0, 1].
    """
    masks = kernels.masks() if isinstance(kernels, FourierKernelBank) else np.asarray(kernels)
    x = np.asarray(x)
    if mode == "ideal":
        return fourier_conv_ideal(x, masks)[0]
    if mode == "physical":
        return fourier_conv_physical(x, masks, config, expansion, rng)
    raise ValueError(f"unknown forward mode {mode!r}")


FAST_PRESET = dict(kernel_size=32)


# --------------------------------------------------------------------------
# Model
# --------------------------------------------------------------------------

@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 64
    learning_rate: float = 1e-3
    seed: int = 0
    forward_mode: str = "ideal"
    quant_bits: int = 1
    kernel_size: int = 208
    num_kernels: int = 16
    hidden_dim: int = 1024
    init_std: float = 0.05
    dtype: str = "float32"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs: must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size: must be >= 1")
        if self.forward_mode not in ("ideal", "physical"):
            raise ValueError("forward_mode: must be 'ideal' or 'physical'")
        if self.quant_bits not in (1, 2, 8, 32):
            raise ValueError("quant_bits: must be 1, 2, 8 or 32")


class FourierCNN:
    """Parameters live in ``self.params`` (trainable) and ``self.buffers``
    (batch-norm running statistics)."""

    PARAM_NAMES = ("kernels", "bn_gamma", "bn_beta", "fc1_w", "fc1_b", "fc2_w", "fc2_b")

    def __init__(self, image_size, in_channels=1, kernel_size=32, num_kernels=16,
                 hidden_dim=1024, num_classes=10, quant_bits=1, init_std=0.05, seed=0,
                 dtype=np.float32):
        if kernel_size < image_size:
            raise ValueError("kernel_size must be at least the image size")
        if image_size % POOL:
            raise ValueError(f"image size must be divisible by the {POOL}x{POOL} pool")
        self.image_size = image_size
        self.in_channels = in_channels
        self.kernel_size = kernel_size
        self.quant_bits = quant_bits
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)
        features = num_kernels * (image_size // POOL) ** 2
        b1 = 1.0 / np.sqrt(features)
        b2 = 1.0 / np.sqrt(hidden_dim)
        p = {
            "kernels": rng.normal(0.0, init_std, (num_kernels, kernel_size, kernel_size)),
            "bn_gamma": np.ones(num_kernels),
            "bn_beta": np.zeros(num_kernels),
            "fc1_w": rng.uniform(-b1, b1, (hidden_dim, features)),
            "fc1_b": rng.uniform(-b1, b1, hidden_dim),
            "fc2_w": rng.uniform(-b2, b2, (num_classes, hidden_dim)),
            "fc2_b": rng.uniform(-b2, b2, num_classes),
        }
        self.params = {k: v.astype(self.dtype) for k, v in p.items()}
        self.buffers = {"bn_mean": np.zeros(num_kernels, self.dtype),
                        "bn_var": np.ones(num_kernels, self.dtype)}

    @property
    def num_kernels(self):
        return self.params["kernels"].shape[0]

    def copy(self):
        return copy.deepcopy(self)

    def masks(self):
        return quantize(self.params["kernels"], self.quant_bits).astype(self.dtype)

    def preprocess(self, x):
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim == 3:
            x = x[:, None]
        if x.shape[1] != self.in_channels or x.shape[-1] != self.image_size:
            raise ValueError(
                f"expected (batch, {self.in_channels}, {self.image_size}, {self.image_size}) "
                f"input, got {x.shape}")
        return zero_pad_center(x, self.kernel_size, self.kernel_size)

    # -- conv layer -------------------------------------------------------
    def conv(self, x, mode="ideal", config=None, expansion=4, rng=None, masks=None, bench=None,
             keep_cache=False):
        """Conv maps and the cache ``backward`` needs. In physical mode the
        cache is only built when ``keep_cache`` is set; it then holds the
        ideal path's intermediates, so the bench is differentiated as if it
        were ideal (straight-through)."""
        xp = self.preprocess(x)
        masks = self.masks() if masks is None else masks
        if mode == "ideal":
            maps, cache = fourier_conv_ideal(xp, masks)
            return maps, cache
        if mode == "physical":
            if config is None:
                raise ValueError("physical mode needs a SystemConfig")
            maps = fourier_conv_physical(xp, masks, config, expansion, rng, bench)
            cache = fourier_conv_ideal(xp, masks)[1] if keep_cache else None
            return maps.astype(self.dtype), cache
        raise ValueError(f"unknown forward mode {mode!r}")

    # -- electronic head ----------------------------------------------------
    def features(self, maps, train=False):
        """Crop, batch-norm and pool the conv maps into FC1 inputs."""
        p = self.params
        u = center_crop(maps, self.image_size, self.image_size)
        if u.shape[1] != self.num_kernels:
            raise ValueError(f"expected {self.num_kernels} maps, got {u.shape[1]}")
        if train:
            mean = u.mean(axis=(0, 2, 3))
            var = u.var(axis=(0, 2, 3))
            n = u.size // u.shape[1]
            m = BN_MOMENTUM
            self.buffers["bn_mean"] = ((1 - m) * self.buffers["bn_mean"] + m * mean).astype(self.dtype)
            unbiased = var * n / max(n - 1, 1)
            self.buffers["bn_var"] = ((1 - m) * self.buffers["bn_var"] + m * unbiased).astype(self.dtype)
        else:
            mean, var = self.buffers["bn_mean"], self.buffers["bn_var"]
        inv_std = 1.0 / np.sqrt(var + BN_EPS)
        xhat = (u - mean[:, None, None]) * inv_std[:, None, None]
        v = p["bn_gamma"][:, None, None] * xhat + p["bn_beta"][:, None, None]
        b, k, h, w = v.shape
        windows = v.reshape(b, k, h // POOL, POOL, w // POOL, POOL).transpose(0, 1, 2, 4, 3, 5)
        windows = windows.reshape(b, k, h // POOL, w // POOL, POOL * POOL)
        arg = windows.argmax(axis=-1)
        pooled = np.take_along_axis(windows, arg[..., None], axis=-1)[..., 0]
        feats = pooled.reshape(b, -1)
        cache = dict(xhat=xhat, inv_std=inv_std, arg=arg, shape=v.shape, maps_shape=maps.shape)
        return feats, cache

    def fc1(self, feats):
        return feats @ self.params["fc1_w"].T + self.params["fc1_b"]

    def head_from_features(self, feats):
        pre = self.fc1(feats)
        hidden = np.maximum(pre, 0)
        return hidden @ self.params["fc2_w"].T + self.params["fc2_b"], pre, hidden

    def head_forward(self, maps, train=False):
        feats, fcache = self.features(maps, train)
        scores, pre, hidden = self.head_from_features(feats)
        return scores, dict(feats=feats, pre=pre, hidden=hidden, **fcache)

    def forward(self, x, train=False, mode="ideal", config=None, masks=None, **kw):
        maps, ccache = self.conv(x, mode, config, masks=masks, **kw)
        scores, hcache = self.head_forward(maps, train)
        hcache["conv"] = ccache
        return scores, hcache

    # -- gradients ----------------------------------------------------------
    def backward(self, scores, cache, labels):
        """Softmax cross-entropy loss and gradients for every parameter.

        ``grads["masks"]`` is the gradient w.r.t. the quantised masks;
        ``grads["kernels"]`` passes it through the straight-through
        quantiser to the real weights.
        """
        p = self.params
        labels = np.asarray(labels)
        b = scores.shape[0]
        z = scores - scores.max(axis=1, keepdims=True)
        logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
        loss = float(-logp[np.arange(b), labels].mean())
        d_scores = np.exp(logp)
        d_scores[np.arange(b), labels] -= 1.0
        d_scores /= b

        g = {}
        g["fc2_w"] = d_scores.T @ cache["hidden"]
        g["fc2_b"] = d_scores.sum(axis=0)
        d_pre = (d_scores @ p["fc2_w"]) * (cache["pre"] > 0)
        g["fc1_w"] = d_pre.T @ cache["feats"]
        g["fc1_b"] = d_pre.sum(axis=0)
        d_feats = d_pre @ p["fc1_w"]

        bsz, k, h, w = cache["shape"]
        d_pooled = d_feats.reshape(bsz, k, h // POOL, w // POOL)
        d_windows = np.zeros(d_pooled.shape + (POOL * POOL,), dtype=d_pooled.dtype)
        np.put_along_axis(d_windows, cache["arg"][..., None], d_pooled[..., None], axis=-1)
        d_v = d_windows.reshape(bsz, k, h // POOL, w // POOL, POOL, POOL)
        d_v = d_v.transpose(0, 1, 2, 4, 3, 5).reshape(bsz, k, h, w)

        xhat = cache["xhat"]
        g["bn_gamma"] = (d_v * xhat).sum(axis=(0, 2, 3))
        g["bn_beta"] = d_v.sum(axis=(0, 2, 3))
        d_xhat = d_v * p["bn_gamma"][:, None, None]
        n = bsz * h * w
        d_u = (cache["inv_std"][:, None, None] / n) * (
            n * d_xhat - d_xhat.sum(axis=(0, 2, 3))[:, None, None]
            - xhat * (d_xhat * xhat).sum(axis=(0, 2, 3))[:, None, None])

        d_maps = np.zeros(cache["maps_shape"], dtype=d_u.dtype)
        big = cache["maps_shape"][-1]
        o = (big - h) // 2
        d_maps[:, :, o:o + h, o:o + w] = d_u
        if cache["conv"] is None:
            raise ValueError("backward needs an ideal-mode forward pass")
        g["masks"] = fourier_conv_backward(d_maps, cache["conv"])
        g["kernels"] = quantize_backward(p["kernels"], self.quant_bits, g["masks"])
        return loss, g

    def loss_and_grads(self, x, labels, train=True, masks=None):
        scores, cache = self.forward(x, train=train, masks=masks)
        return self.backward(scores, cache, labels)

    def predict(self, x, mode="ideal", config=None, batch_size=256, rng=None, **kw):
        preds = []
        for i in range(0, len(x), batch_size):
            scores, _ = self.forward(x[i:i + batch_size], mode=mode, config=config, rng=rng, **kw)
            preds.append(scores.argmax(axis=1))
        return np.concatenate(preds)

    # -- persistence --------------------------------------------------------
    def save(self, directory, **manifest_extra):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        arrays = dict(self.params, **self.buffers)
        files = {}
        for name, arr in arrays.items():
            fname = f"{name}.aoff"
            datasets_io.write_raster(directory / fname, _as_raster(arr))
            files[name] = {"file": fname, "shape": list(arr.shape)}
        manifest = dict(image_size=self.image_size, in_channels=self.in_channels,
                        kernel_size=self.kernel_size, quant_bits=self.quant_bits,
                        num_kernels=self.num_kernels, hidden_dim=self.params["fc1_w"].shape[0],
                        arrays=files)
        manifest.update(manifest_extra)
        (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
        return directory / "manifest.json"

    @classmethod
    def load(cls, directory):
        directory = Path(directory)
        manifest = json.loads((directory / "manifest.json").read_text())
        model = cls(manifest["image_size"], manifest["in_channels"], manifest["kernel_size"],
                    manifest["num_kernels"], manifest["hidden_dim"],
                    quant_bits=manifest["quant_bits"])
        for name, entry in manifest["arrays"].items():
            arr = datasets_io.read_raster(directory / entry["file"]).reshape(entry["shape"])
            target = model.params if name in model.params else model.buffers
            target[name] = arr.astype(model.dtype)
        return model, manifest


def _as_raster(arr):
    # Stored flat as (leading axis, everything else); the manifest keeps the shape.
    arr = np.asarray(arr)
    return arr.reshape(1, -1) if arr.ndim < 2 else arr.reshape(arr.shape[0], -1)


# --------------------------------------------------------------------------
# Optimiser and training loop
# --------------------------------------------------------------------------

class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8, names=None):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.names = list(params) if names is None else list(names)
        self.m = {k: np.zeros_like(params[k]) for k in self.names}
        self.v = {k: np.zeros_like(params[k]) for k in self.names}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1 - self.beta1 ** self.t
        c2 = 1 - self.beta2 ** self.t
        for k in self.names:
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            update = self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)
            params[k] = (params[k] - update).astype(params[k].dtype)


def build_model(dataset, config):
    n, c, h, w = dataset.train_x.shape
    return FourierCNN(h, c, config.kernel_size, config.num_kernels, config.hidden_dim,
                      quant_bits=config.quant_bits, init_std=config.init_std,
                      seed=config.seed, dtype=np.dtype(config.dtype))


def train(dataset, config, model=None, system_config=None, progress=None):
    """Adam on softmax cross-entropy; returns the best-validation model and
    a per-epoch history.

    With ``forward_mode="physical"`` the conv layer is acquired through
    ``system_config`` and differentiated straight-through (see
    :meth:`FourierCNN.conv`). This is slow and meant for small instances.
    Validation always uses the ideal path.
    """
    if len(dataset.train_x) == 0:
        raise ValueError("empty training set")
    physical = config.forward_mode == "physical"
    if physical and system_config is None:
        raise ValueError("forward_mode: physical training needs a system_config")
    model = build_model(dataset, config) if model is None else model
    bench = FourFSystem(system_config) if physical else None
    noise_rng = np.random.default_rng(config.seed + 1)
    opt = Adam(model.params, lr=config.learning_rate, names=FourierCNN.PARAM_NAMES)
    rng = np.random.default_rng(config.seed)
    history = []
    best, best_acc = model.copy(), -1.0
    n = len(dataset.train_x)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        losses, correct = [], 0
        for i in range(0, n, config.batch_size):
            idx = order[i:i + config.batch_size]
            if physical:
                scores, cache = model.forward(dataset.train_x[idx], train=True, mode="physical",
                                              config=system_config, rng=noise_rng, bench=bench,
                                              keep_cache=True)
            else:
                scores, cache = model.forward(dataset.train_x[idx], train=True)
            loss, grads = model.backward(scores, cache, dataset.train_y[idx])
            opt.step(model.params, grads)
            losses.append(loss * len(idx))
            correct += int((scores.argmax(axis=1) == dataset.train_y[idx]).sum())
        val_acc = accuracy(model.predict(dataset.val_x), dataset.val_y) if len(dataset.val_x) else float("nan")
        rec = dict(epoch=epoch, train_loss=float(sum(losses) / n), train_acc=correct / n,
                   val_acc=val_acc)
        history.append(rec)
        log.info("epoch %d loss %.4f train %.4f val %.4f", epoch, rec["train_loss"],
                 rec["train_acc"], val_acc)
        if progress:
            progress(rec)
        if not val_acc <= best_acc:
            best, best_acc = model.copy(), val_acc
    return best, history


def evaluate(model, x, y, mode="ideal", config=None, seed=0, **kw):
    """Accuracy and confusion matrix on ``(x, y)``. Physical mode acquires
    the conv layer through ``config``; camera noise is seeded by ``seed``."""
    rng = np.random.default_rng(seed)
    preds = model.predict(x, mode=mode, config=config, rng=rng, **kw)
    return accuracy(preds, y), confusion(preds, y, model.params["fc2_w"].shape[0])


def conv_features(model, x, mode="ideal", config=None, seed=0, batch_size=256, expansion=4):
    """FC1 inputs (after crop, batch-norm, pool, flatten) for every sample."""
    rng = np.random.default_rng(seed)
    bench = FourFSystem(config) if mode == "physical" else None
    out = []
    for i in range(0, len(x), batch_size):
        maps, _ = model.conv(x[i:i + batch_size], mode, config, expansion=expansion, rng=rng,
                             bench=bench)
        feats, _ = model.features(maps, train=False)
        out.append(feats)
    return np.concatenate(out)


def accuracy_from_features(model, feats, y):
    scores, _, _ = model.head_from_features(feats)
    return accuracy(scores.argmax(axis=1), y)


def history_json(history, config):
    return json.dumps({"config": asdict(config), "history": history}, indent=2)
