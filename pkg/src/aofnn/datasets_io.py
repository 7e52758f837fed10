"""Dataset parsers, raster/PGM serialisation and JSON configuration."""
import dataclasses
import gzip
import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IDX_IMAGES = 0x00000803
IDX_LABELS = 0x00000801
CIFAR_RECORD = 3073
RASTER_MAGIC = b"AOFF"
RASTER_VERSION = 1
MNIST_SPLIT_SEED = 1234
MNIST_VAL = 5000


class FormatError(ValueError):
    """Malformed file contents."""


class BadMagicError(FormatError):
    pass


class TruncatedError(FormatError):
    pass


class CountMismatchError(FormatError):
    pass


class BadLabelError(FormatError):
    pass


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


# --------------------------------------------------------------------------
# IDX (MNIST)
# --------------------------------------------------------------------------

def _read_bytes(path):
    path = Path(path)
    data = path.read_bytes()
    if data[:2] == b"\x1f\x8b":
        data = gzip.decompress(data)
    return data


def parse_idx_images(data):
    if len(data) < 16:
        raise TruncatedError(f"IDX image header needs 16 bytes, got {len(data)}")
    magic, n, rows, cols = struct.unpack(">IIII", data[:16])
    if magic != IDX_IMAGES:
        raise BadMagicError(f"IDX image magic 0x{magic:08x}, expected 0x{IDX_IMAGES:08x}")
    need = 16 + n * rows * cols
    if len(data) < need:
        raise TruncatedError(f"IDX image payload has {len(data) - 16} bytes, header promises {need - 16}")
    if len(data) > need:
        raise CountMismatchError(f"IDX image file has {len(data) - need} trailing bytes")
    return np.frombuffer(data, np.uint8, n * rows * cols, 16).reshape(n, rows, cols)


def parse_idx_labels(data):
    if len(data) < 8:
        raise TruncatedError(f"IDX label header needs 8 bytes, got {len(data)}")
    magic, n = struct.unpack(">II", data[:8])
    if magic != IDX_LABELS:
        raise BadMagicError(f"IDX label magic 0x{magic:08x}, expected 0x{IDX_LABELS:08x}")
    if len(data) < 8 + n:
        raise TruncatedError(f"IDX label payload has {len(data) - 8} bytes, header promises {n}")
    if len(data) > 8 + n:
        raise CountMismatchError(f"IDX label file has {len(data) - 8 - n} trailing bytes")
    return np.frombuffer(data, np.uint8, n, 8).copy()


def _find(root, stems):
    for stem in stems:
        for suffix in ("", ".gz"):
            p = Path(root) / (stem + suffix)
            if p.exists():
                return p
    raise FileNotFoundError(f"none of {stems} (optionally .gz) found in {root}")


def read_idx_pair(images_path, labels_path):
    images = parse_idx_images(_read_bytes(images_path))
    labels = parse_idx_labels(_read_bytes(labels_path))
    if len(images) != len(labels):
        raise CountMismatchError(f"{len(images)} images but {len(labels)} labels")
    if labels.size and labels.max() > 9:
        raise BadLabelError(f"label {labels.max()} out of range 0..9")
    return images, labels


@dataclass
class LabeledSet:
    """Images ``(n, channels, rows, cols)`` float32 in [0, 1], int64 labels."""
    train_x: np.ndarray
    train_y: np.ndarray
    val_x: np.ndarray
    val_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    name: str = ""

    def subset(self, n_train, seed=0):
        """A copy with ``n_train`` training samples drawn without replacement."""
        if n_train > len(self.train_x):
            raise ValueError(f"requested {n_train} of {len(self.train_x)} training samples")
        idx = np.sort(np.random.default_rng(seed).permutation(len(self.train_x))[:n_train])
        return dataclasses.replace(self, train_x=self.train_x[idx], train_y=self.train_y[idx])


def _split(x, y, n_val, seed):
    if n_val is None:
        # Small corpora keep at most a twelfth of the images for validation.
        n_val = min(MNIST_VAL, len(x) // 12)
    order = np.random.default_rng(seed).permutation(len(x))
    val, tr = np.sort(order[:n_val]), np.sort(order[n_val:])
    return x[tr], y[tr], x[val], y[val]


def load_mnist(path, n_val=None, seed=MNIST_SPLIT_SEED):
    """Read the four MNIST IDX files under ``path``.

    Both ``train-images-idx3-ubyte`` and ``train-images.idx3-ubyte`` names
    are accepted, gzipped or not. The 60k training images are split into
    55k train and 5k validation by a fixed permutation.
    """
    tri, trl = read_idx_pair(
        _find(path, ["train-images-idx3-ubyte", "train-images.idx3-ubyte"]),
        _find(path, ["train-labels-idx1-ubyte", "train-labels.idx1-ubyte"]))
    tei, tel = read_idx_pair(
        _find(path, ["t10k-images-idx3-ubyte", "t10k-images.idx3-ubyte"]),
        _find(path, ["t10k-labels-idx1-ubyte", "t10k-labels.idx1-ubyte"]))
    to_f = lambda a: (a.astype(np.float32) / 255.0)[:, None]
    x_tr, y_tr, x_va, y_va = _split(to_f(tri), trl.astype(np.int64), n_val, seed)
    return LabeledSet(x_tr, y_tr, x_va, y_va, to_f(tei), tel.astype(np.int64), "mnist")


# --------------------------------------------------------------------------
# CIFAR-10 binary batches
# --------------------------------------------------------------------------

def parse_cifar_batch(data):
    """Records of one label byte plus 3072 channel-planar pixels."""
    if len(data) == 0 or len(data) % CIFAR_RECORD:
        raise TruncatedError(f"CIFAR batch length {len(data)} is not a multiple of {CIFAR_RECORD}")
    rec = np.frombuffer(data, np.uint8).reshape(-1, CIFAR_RECORD)
    labels = rec[:, 0].astype(np.int64)
    if labels.max() > 9:
        raise BadLabelError(f"label {labels.max()} out of range 0..9")
    return rec[:, 1:].reshape(-1, 3, 32, 32), labels


def load_cifar10(path, n_val=None, seed=MNIST_SPLIT_SEED):
    """Read ``data_batch_1..5.bin`` and ``test_batch.bin`` under ``path``
    (the ``cifar-10-batches-bin`` subdirectory is also searched)."""
    root = Path(path)
    if (root / "cifar-10-batches-bin").is_dir():
        root = root / "cifar-10-batches-bin"
    xs, ys = [], []
    for i in range(1, 6):
        x, y = parse_cifar_batch(_read_bytes(_find(root, [f"data_batch_{i}.bin"])))
        xs.append(x)
        ys.append(y)
    tx, ty = parse_cifar_batch(_read_bytes(_find(root, ["test_batch.bin"])))
    to_f = lambda a: a.astype(np.float32) / 255.0
    x_tr, y_tr, x_va, y_va = _split(to_f(np.concatenate(xs)), np.concatenate(ys), n_val, seed)
    return LabeledSet(x_tr, y_tr, x_va, y_va, to_f(tx), ty, "cifar10")


def default_data_dir(name):
    env = {"mnist": "AOFNN_MNIST_DIR", "cifar10": "AOFNN_CIFAR10_DIR"}[name]
    return Path(os.environ.get(env, Path.home() / "data" / name))


def load_dataset(name, path=None):
    path = default_data_dir(name) if path is None else path
    if name == "mnist":
        return load_mnist(path)
    if name == "cifar10":
        return load_cifar10(path)
    raise ValueError(f"unknown dataset {name!r}")


# --------------------------------------------------------------------------
# Raster and PGM
# --------------------------------------------------------------------------

def encode_raster(arr):
    """``(rows, cols)`` or ``(rows, cols, channels)`` -> AOFF bytes.

    Payload is row-major float32 little-endian with channels innermost.
    """
    arr = np.asarray(arr)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ValueError(f"raster needs 2 or 3 axes, got {arr.ndim}")
    rows, cols, ch = arr.shape
    header = RASTER_MAGIC + struct.pack("<IIII", RASTER_VERSION, rows, cols, ch)
    return header + np.ascontiguousarray(arr, dtype="<f4").tobytes()


def decode_raster(data):
    if len(data) < 20:
        raise TruncatedError(f"raster header needs 20 bytes, got {len(data)}")
    if data[:4] != RASTER_MAGIC:
        raise BadMagicError(f"raster magic {data[:4]!r}, expected {RASTER_MAGIC!r}")
    version, rows, cols, ch = struct.unpack("<IIII", data[4:20])
    if version != RASTER_VERSION:
        raise FormatError(f"unsupported raster version {version}")
    need = rows * cols * ch * 4
    if len(data) - 20 != need:
        raise TruncatedError(f"raster payload has {len(data) - 20} bytes, expected {need}")
    out = np.frombuffer(data, "<f4", rows * cols * ch, 20).reshape(rows, cols, ch)
    return out.astype(np.float32)


def write_raster(path, arr):
    Path(path).write_bytes(encode_raster(arr))


def read_raster(path):
    """Returns ``(rows, cols, channels)`` float32; single-channel rasters
    are squeezed to 2-D."""
    out = decode_raster(Path(path).read_bytes())
    return out[:, :, 0] if out.shape[2] == 1 else out


def to_8bit(img):
    return np.floor(np.clip(np.asarray(img, dtype=np.float64), 0, 1) * 255 + 0.5).astype(np.uint8)


def encode_pgm(img):
    """Binary greyscale PGM, values in [0, 1] rounded to 8 bits."""
    img = to_8bit(img)
    if img.ndim != 2:
        raise ValueError("PGM holds a single 2-D image")
    rows, cols = img.shape
    return f"P5 {cols} {rows} 255\n".encode("ascii") + img.tobytes()


def decode_pgm(data):
    parts = data.split(maxsplit=4)
    if len(parts) < 4 or parts[0] != b"P5":
        raise BadMagicError("not a binary (P5) PGM")
    try:
        cols, rows, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    except ValueError as exc:
        raise FormatError(f"bad PGM header: {exc}") from None
    if maxval != 255:
        raise FormatError(f"only 8-bit PGM supported, maxval {maxval}")
    # Header fields may be separated by any whitespace; one byte follows maxval.
    idx = 0
    for _ in range(4):
        while data[idx:idx + 1].isspace():
            idx += 1
        while idx < len(data) and not data[idx:idx + 1].isspace():
            idx += 1
    header_len = idx + 1
    payload = data[header_len:]
    if len(payload) != rows * cols:
        raise TruncatedError(f"PGM payload has {len(payload)} bytes, expected {rows * cols}")
    return np.frombuffer(payload, np.uint8).reshape(rows, cols)


def write_pgm(path, img):
    Path(path).write_bytes(encode_pgm(img))


def read_pgm(path, normalise=True):
    """8-bit image; ``normalise`` maps it to floats in [0, 1]."""
    img = decode_pgm(Path(path).read_bytes())
    return img.astype(np.float64) / 255.0 if normalise else img


def read_image(path):
    """Load a greyscale image from PGM, raster or ``.npy``."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    suffix = path.suffix.lower()
    if suffix == ".npy":
        return np.load(path).astype(np.float64)
    if suffix in (".aoff", ".raster"):
        return read_raster(path).astype(np.float64)
    return read_pgm(path)


# --------------------------------------------------------------------------
# JSON configuration
# --------------------------------------------------------------------------

def _build(cls, data, path):
    """Instantiate ``cls`` from a dict; omitted fields keep their defaults
    and nested dataclass fields are built recursively."""
    if not isinstance(data, dict):
        raise ConfigError(path or "<root>", f"expected an object, got {type(data).__name__}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        sub = f"{path}.{key}" if path else key
        if key not in fields:
            raise ConfigError(sub, f"unknown key (allowed: {', '.join(sorted(fields))})")
        default = _default_of(fields[key])
        if dataclasses.is_dataclass(default):
            kwargs[key] = _build(type(default), value, sub)
        elif isinstance(default, tuple) and isinstance(value, list):
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        raise _field_error(path, exc) from None


def _default_of(f):
    if f.default is not dataclasses.MISSING:
        return f.default
    if f.default_factory is not dataclasses.MISSING:
        return f.default_factory()
    return None


def _field_error(path, exc):
    name, _, rest = str(exc).partition(":")
    name = name.strip()
    if rest and " " not in name:
        return ConfigError(f"{path}.{name}" if path else name, rest.strip())
    return ConfigError(path or "<root>", str(exc))


def system_config_from_dict(data):
    """``SystemConfig`` from a JSON object. Units are SI and radians;
    omitted fields keep their nominal defaults."""
    from .optics import SystemConfig
    return _build(SystemConfig, data, "")


def train_config_from_dict(data):
    from .fourier_cnn import TrainConfig
    return _build(TrainConfig, data, "")


def load_config(path, kind="system"):
    """Read a JSON file into a ``SystemConfig`` (``kind="system"``) or a
    ``TrainConfig`` (``kind="train"``). A file holding ``{"system": {...},
    "train": {...}}`` sections is also accepted."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("<root>", f"invalid JSON: {exc}") from None
    if isinstance(data, dict) and set(data) <= {"system", "train"} and data:
        data = data.get(kind, {})
    if kind == "system":
        return system_config_from_dict(data)
    if kind == "train":
        return train_config_from_dict(data)
    raise ValueError(f"unknown config kind {kind!r}")


def config_to_dict(cfg):
    return dataclasses.asdict(cfg)
