import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from aofnn.field_math import (CENTER, CORNER, ComplexField, Placement, as_field, center_crop,
                              dft2, expand_pixels, idft2, intensity, shift_layout,
                              superpixel_reduce, tile_capacity, tile_images, untile_images,
                              zero_pad_center)


def dft_matrix(n):
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def rand_field(rng, shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_dft2_matches_explicit_matrix():
    rng = np.random.default_rng(0)
    f = rand_field(rng, (6, 10))
    expected = dft_matrix(6) @ f @ dft_matrix(10).T
    assert rel(dft2(as_field(f)).values, expected) < 1e-12


def test_impulse_gives_flat_spectrum():
    f = np.zeros((4, 4))
    f[0, 0] = 1
    out = dft2(as_field(f))
    assert out.layout == CORNER
    np.testing.assert_allclose(out.values, 0.25, atol=1e-15)
    back = idft2(as_field(np.full((4, 4), 0.25)))
    np.testing.assert_allclose(back.values, f, atol=1e-15)


@pytest.mark.parametrize("shape", [(8, 8), (16, 16), (7, 12), (256, 256)])
def test_parseval_and_round_trip(shape):
    rng = np.random.default_rng(1)
    f = rand_field(rng, shape)
    spec = dft2(as_field(f)).values
    # Energy summed by explicit loops over rows is an independent oracle.
    e_space = sum(float(np.sum(np.abs(row) ** 2)) for row in f)
    e_freq = sum(float(np.sum(np.abs(row) ** 2)) for row in spec)
    assert abs(e_space - e_freq) / e_space < 1e-12
    assert rel(idft2(ComplexField(spec)).values, f) < 1e-12


def test_linearity():
    rng = np.random.default_rng(2)
    f, g = rand_field(rng, (12, 12)), rand_field(rng, (12, 12))
    a, b = 0.3 - 1.2j, 2.5
    lhs = dft2(as_field(a * f + b * g)).values
    rhs = a * dft2(as_field(f)).values + b * dft2(as_field(g)).values
    assert rel(lhs, rhs) < 1e-12


def test_transforms_reject_bad_input():
    with pytest.raises(ValueError):
        dft2(as_field(np.array([[1.0, np.nan], [0, 0]])))
    with pytest.raises(ValueError):
        dft2(ComplexField(np.zeros((4, 4), complex), CENTER))
    with pytest.raises(ValueError):
        ComplexField(np.zeros((4, 4)), "middle")


def test_shift_layout_impulse_and_odd_sizes():
    f = np.zeros((4, 4))
    f[0, 0] = 1
    c = shift_layout(as_field(f))
    assert c.layout == CENTER and c.values[2, 2] == 1
    g = np.arange(25.0).reshape(5, 5)
    s = shift_layout(as_field(g))
    # Explicit index map: centred sample (i, j) holds corner sample (i - 2, j - 2) mod 5.
    for i in range(5):
        for j in range(5):
            assert s.values[i, j] == g[(i - 2) % 5, (j - 2) % 5]
    back = shift_layout(s)
    assert back.layout == CORNER
    np.testing.assert_array_equal(back.values, g)


@given(hnp.arrays(np.float64, st.tuples(st.integers(1, 6).map(lambda n: 2 * n),
                                         st.integers(1, 6).map(lambda n: 2 * n)),
                  elements=st.floats(-10, 10)))
def test_shift_layout_involutive_even(a):
    f = as_field(a)
    twice = shift_layout(ComplexField(shift_layout(f).values, CORNER))
    np.testing.assert_array_equal(twice.values, f.values)


def test_intensity_examples():
    assert np.all(intensity(as_field(np.exp(1j * np.linspace(0, 6, 16)).reshape(4, 4))) == pytest.approx(1.0))
    assert np.all(intensity(as_field(np.zeros((3, 3)))) == 0)
    assert intensity(as_field(np.full((2, 2), 0.5 + 0.5j)))[0, 0] == pytest.approx(0.5)


def test_zero_pad_center_mnist_offsets():
    digit = np.ones((28, 28))
    big = zero_pad_center(digit, 208, 208)
    rows = np.nonzero(big.any(axis=1))[0]
    assert rows[0] == 90 and rows[-1] == 117
    assert big.sum() == digit.sum()
    np.testing.assert_array_equal(zero_pad_center(digit, 28, 28), digit)
    np.testing.assert_array_equal(center_crop(big, 28, 28), digit)
    with pytest.raises(ValueError):
        zero_pad_center(digit, 20, 40)


def test_expand_and_reduce_examples():
    img = np.random.default_rng(3).random((208, 208))
    assert expand_pixels(img, 4).shape == (832, 832)
    np.testing.assert_array_equal(expand_pixels(img, 1), img)
    assert expand_pixels(img, 3).mean() == pytest.approx(img.mean())
    assert superpixel_reduce(np.ones((17, 17)), 17)[0, 0] == 1.0
    board = (np.add.outer(np.arange(34), np.arange(34)) % 2).astype(float)
    # Direct averaging oracle; with an odd block each mean is 144/289 or 145/289.
    expected = np.array([[board[17 * i:17 * i + 17, 17 * j:17 * j + 17].sum() / 289
                          for j in range(2)] for i in range(2)])
    np.testing.assert_allclose(superpixel_reduce(board, 17), expected, rtol=1e-15)
    np.testing.assert_allclose(superpixel_reduce(board, 17), 0.5, atol=1 / 289)
    with pytest.raises(ValueError):
        expand_pixels(img, 0)
    with pytest.raises(ValueError):
        superpixel_reduce(np.ones((10, 10)), 3)


@settings(max_examples=30)
@given(hnp.arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 5)),
                  elements=st.floats(0, 1)), st.integers(1, 17))
def test_reduce_inverts_expand(img, k):
    np.testing.assert_array_equal(superpixel_reduce(expand_pixels(img, k), k), img)


def test_tiling_capacity_and_errors():
    assert tile_capacity((208, 208), 1080, 1920) == 45
    tiles = [np.full((208, 208), i / 50) for i in range(45)]
    canvas, places = tile_images(tiles, 1080, 1920)
    assert places[9] == Placement(208, 0)
    with pytest.raises(ValueError, match="45"):
        tile_images(tiles + [tiles[0]], 1080, 1920)
    one = np.ones((5, 7))
    canvas, places = tile_images([one], 5, 7)
    assert places == [Placement(0, 0)]
    np.testing.assert_array_equal(canvas, one)


@settings(max_examples=30)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 12), st.integers(0, 2 ** 31))
def test_tile_round_trip(tr, tc, n, seed):
    rng = np.random.default_rng(seed)
    imgs = [rng.random((tr, tc)) for _ in range(n)]
    side = int(np.ceil(np.sqrt(n)))
    canvas, places = tile_images(imgs, side * tr, side * tc)
    for a, b in zip(imgs, untile_images(canvas, places, (tr, tc))):
        np.testing.assert_array_equal(a, b)
