import gzip
import json
import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from aofnn import datasets_io as dio
from aofnn.fourier_cnn import TrainConfig
from aofnn.optics import SystemConfig


def idx_images(n, rows=28, cols=28, seed=0):
    data = np.random.default_rng(seed).integers(0, 256, (n, rows, cols), dtype=np.uint8)
    return struct.pack(">IIII", 0x803, n, rows, cols) + data.tobytes(), data


def idx_labels(n, seed=0):
    labels = np.random.default_rng(seed).integers(0, 10, n, dtype=np.uint8)
    return struct.pack(">II", 0x801, n) + labels.tobytes(), labels


def cifar_batch(n, seed=0):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 10, n, dtype=np.uint8)
    pixels = rng.integers(0, 256, (n, 3072), dtype=np.uint8)
    return np.concatenate([labels[:, None], pixels], axis=1).tobytes(), labels, pixels


def write_mnist(root, n_train=12, n_test=4, gz=False, dotted=False):
    sep = "." if dotted else "-"
    files = {
        f"train-images{sep}idx3-ubyte": idx_images(n_train)[0],
        f"train-labels{sep}idx1-ubyte": idx_labels(n_train)[0],
        f"t10k-images{sep}idx3-ubyte": idx_images(n_test, seed=1)[0],
        f"t10k-labels{sep}idx1-ubyte": idx_labels(n_test, seed=1)[0],
    }
    for name, blob in files.items():
        if gz:
            (root / (name + ".gz")).write_bytes(gzip.compress(blob))
        else:
            (root / name).write_bytes(blob)


def test_idx_parsing_and_normalisation():
    blob, data = idx_images(3, 4, 5)
    np.testing.assert_array_equal(dio.parse_idx_images(blob), data)
    lab, labels = idx_labels(3)
    np.testing.assert_array_equal(dio.parse_idx_labels(lab), labels)


@pytest.mark.parametrize("gz,dotted", [(False, False), (True, False), (False, True)])
def test_load_mnist_layouts(tmp_path, gz, dotted):
    write_mnist(tmp_path, gz=gz, dotted=dotted)
    d = dio.load_mnist(tmp_path, n_val=2)
    assert d.train_x.shape == (10, 1, 28, 28) and d.val_x.shape == (2, 1, 28, 28)
    assert d.test_x.shape == (4, 1, 28, 28)
    assert d.train_x.dtype == np.float32 and d.train_x.max() <= 1.0
    again = dio.load_mnist(tmp_path, n_val=2)
    np.testing.assert_array_equal(d.val_y, again.val_y)


def test_pixel_255_maps_to_one(tmp_path):
    img = np.full((1, 28, 28), 255, np.uint8)
    (tmp_path / "train-images-idx3-ubyte").write_bytes(struct.pack(">IIII", 0x803, 1, 28, 28) + img.tobytes())
    (tmp_path / "train-labels-idx1-ubyte").write_bytes(struct.pack(">II", 0x801, 1) + b"\x03")
    (tmp_path / "t10k-images-idx3-ubyte").write_bytes(struct.pack(">IIII", 0x803, 1, 28, 28) + img.tobytes())
    (tmp_path / "t10k-labels-idx1-ubyte").write_bytes(struct.pack(">II", 0x801, 1) + b"\x03")
    d = dio.load_mnist(tmp_path, n_val=0)
    assert np.all(d.train_x == 1.0)


def mutated_corpora():
    """Ten corrupted inputs with the error class each must raise."""
    img, _ = idx_images(4, 6, 6)
    lab, _ = idx_labels(4)
    cif, _, _ = cifar_batch(3)
    bad_label = bytearray(cif)
    bad_label[3073] = 10
    return [
        ("idx images bad magic", dio.parse_idx_images, b"\x00\x00\x08\x04" + img[4:], dio.BadMagicError),
        ("idx images truncated payload", dio.parse_idx_images, img[:-5], dio.TruncatedError),
        ("idx images truncated header", dio.parse_idx_images, img[:10], dio.TruncatedError),
        ("idx images trailing bytes", dio.parse_idx_images, img + b"\x00", dio.CountMismatchError),
        ("idx labels bad magic", dio.parse_idx_labels, b"\x00\x00\x08\x03" + lab[4:], dio.BadMagicError),
        ("idx labels truncated", dio.parse_idx_labels, lab[:-1], dio.TruncatedError),
        ("idx labels trailing", dio.parse_idx_labels, lab + b"\x01", dio.CountMismatchError),
        ("cifar short record", dio.parse_cifar_batch, cif[:-1], dio.TruncatedError),
        ("cifar empty", dio.parse_cifar_batch, b"", dio.TruncatedError),
        ("cifar label 10", dio.parse_cifar_batch, bytes(bad_label), dio.BadLabelError),
    ]


@pytest.mark.parametrize("name,parser,blob,error", mutated_corpora(), ids=lambda v: v if isinstance(v, str) else "")
def test_mutated_corpora_rejected(name, parser, blob, error):
    with pytest.raises(error):
        parser(blob)


def test_image_label_count_mismatch(tmp_path):
    (tmp_path / "a").write_bytes(idx_images(3)[0])
    (tmp_path / "b").write_bytes(idx_labels(4)[0])
    with pytest.raises(dio.CountMismatchError):
        dio.read_idx_pair(tmp_path / "a", tmp_path / "b")


def test_cifar_channel_planar(tmp_path):
    blob, labels, pixels = cifar_batch(10)
    x, y = dio.parse_cifar_batch(blob)
    assert x.shape == (10, 3, 32, 32)
    np.testing.assert_array_equal(y, labels)
    np.testing.assert_array_equal(x[4, 0].ravel(), pixels[4, :1024])
    np.testing.assert_array_equal(x[4, 2].ravel(), pixels[4, 2048:])
    root = tmp_path / "cifar-10-batches-bin"
    root.mkdir()
    for i in range(1, 6):
        (root / f"data_batch_{i}.bin").write_bytes(cifar_batch(4, seed=i)[0])
    (root / "test_batch.bin").write_bytes(blob)
    d = dio.load_cifar10(tmp_path, n_val=5)
    assert d.train_x.shape == (15, 3, 32, 32) and d.test_x.shape == (10, 3, 32, 32)


@settings(max_examples=30)
@given(hnp.arrays(np.float32, st.tuples(st.integers(1, 6), st.integers(1, 6), st.integers(1, 3)),
                  elements=st.floats(width=32, allow_nan=False)))
def test_raster_round_trip_bit_exact(arr):
    back = dio.decode_raster(dio.encode_raster(arr))
    assert back.tobytes() == arr.astype("<f4").tobytes()


def test_raster_header_and_errors(tmp_path):
    arr = np.arange(6, dtype=np.float32).reshape(2, 3)
    blob = dio.encode_raster(arr)
    assert blob[:4] == b"AOFF"
    assert struct.unpack("<IIII", blob[4:20]) == (1, 2, 3, 1)
    dio.write_raster(tmp_path / "r.aoff", arr)
    np.testing.assert_array_equal(dio.read_raster(tmp_path / "r.aoff"), arr)
    with pytest.raises(dio.BadMagicError):
        dio.decode_raster(b"XOFF" + blob[4:])
    with pytest.raises(dio.TruncatedError):
        dio.decode_raster(blob[:-1])


def test_pgm(tmp_path):
    blob = dio.encode_pgm(np.full((2, 3), 0.5))
    assert blob.startswith(b"P5 3 2 255\n")
    assert set(blob[len(b"P5 3 2 255\n"):]) == {128}
    q = np.random.default_rng(0).integers(0, 256, (5, 7)) / 255
    dio.write_pgm(tmp_path / "a.pgm", q)
    np.testing.assert_array_equal(dio.read_pgm(tmp_path / "a.pgm"), q)
    assert dio.decode_pgm(b"P5\n3 1\n255\n\x01\x02\x03").tolist() == [[1, 2, 3]]
    with pytest.raises(dio.BadMagicError):
        dio.decode_pgm(b"P2 1 1 255\n0")
    with pytest.raises(dio.TruncatedError):
        dio.decode_pgm(b"P5 2 2 255\n\x00")


def test_load_config(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{}")
    assert dio.load_config(p) == SystemConfig()
    cfg = SystemConfig()
    assert cfg.wavelength == 633e-9 and cfg.dmd1.pixel_pitch == 17e-6
    assert cfg.dmd1.tilt_angle == pytest.approx(math.radians(22.5))
    assert cfg.dmd1.fill_factor == pytest.approx(16 / 17)
    assert cfg.dmd1.hole_radius_norm == pytest.approx(0.5 / 17)
    assert cfg.camera.frame_rate == 1000
    p.write_text(json.dumps({"wavelength": 633e-9, "dmd1": {"bit_depth": 1},
                             "lens1": {"seidel": {"w040": 0.2}}}))
    cfg = dio.load_config(p)
    assert cfg.dmd1.refresh_rate == 20000 and cfg.lens1.seidel.w040 == 0.2
    p.write_text(json.dumps({"dmd1": {"tilt_angle": -1}}))
    with pytest.raises(dio.ConfigError) as err:
        dio.load_config(p)
    assert err.value.path == "dmd1.tilt_angle"
    p.write_text(json.dumps({"dmd1": {"tilt_angel": 0.1}}))
    with pytest.raises(dio.ConfigError, match="dmd1.tilt_angel"):
        dio.load_config(p)
    p.write_text(json.dumps({"train": {"epochs": 3}, "system": {}}))
    assert dio.load_config(p, "train") == TrainConfig(epochs=3)
    p.write_text(json.dumps({"epochs": 0}))
    with pytest.raises(dio.ConfigError, match="epochs"):
        dio.load_config(p, "train")
