import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aofnn.metrics import (accuracy, agreement, confusion, contrast_structure_map, rmse, ssim,
                           ssim_map)


def loop_ssim(a, b, sigma=1.5, size=11, k1=0.01, k2=0.03):
    """Windowed SSIM evaluated position by position with an explicit window."""
    r = size // 2
    ax = np.arange(-r, r + 1)
    g = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2 * sigma ** 2))
    g /= g.sum()
    c1, c2 = k1 ** 2, k2 ** 2
    vals = []
    for i in range(r, a.shape[0] - r):
        for j in range(r, a.shape[1] - r):
            pa = a[i - r:i + r + 1, j - r:j + r + 1]
            pb = b[i - r:i + r + 1, j - r:j + r + 1]
            ma, mb = (g * pa).sum(), (g * pb).sum()
            va = (g * (pa - ma) ** 2).sum()
            vb = (g * (pb - mb) ** 2).sum()
            cov = (g * (pa - ma) * (pb - mb)).sum()
            vals.append((2 * ma * mb + c1) * (2 * cov + c2) / ((ma ** 2 + mb ** 2 + c1) * (va + vb + c2)))
    return float(np.mean(vals))


def test_ssim_matches_loop_oracle():
    rng = np.random.default_rng(0)
    a = rng.random((24, 20))
    b = np.clip(a + 0.2 * rng.normal(size=a.shape), 0, 1)
    assert ssim(a, b) == pytest.approx(loop_ssim(a, b), abs=1e-12)


def test_ssim_examples():
    rng = np.random.default_rng(1)
    a = rng.random((16, 16))
    assert ssim(a, a) == pytest.approx(1.0)
    board = (np.add.outer(np.arange(16), np.arange(16)) % 2).astype(float)
    value = ssim(board, 1 - board)
    assert value < 0
    assert value == pytest.approx(loop_ssim(board, 1 - board), abs=1e-12)
    with pytest.raises(ValueError):
        ssim(a, a[:-1])
    with pytest.raises(ValueError):
        ssim(a[:5, :5], a[:5, :5])


def test_rmse_examples():
    a = np.random.default_rng(2).random((12, 12))
    assert rmse(a, a) == 0
    assert rmse(np.zeros((3, 3)), np.ones((3, 3))) == 1
    rep = agreement(a, a)
    assert rep.to_dict()["ssim"] == rep.ssim
    with pytest.raises(ValueError):
        rmse(a, a[:2])


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_ssim_symmetric(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.random((14, 14)), rng.random((14, 14))
    assert abs(ssim(a, b) - ssim(b, a)) < 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(-0.5, 0.5))
def test_contrast_structure_shift_invariant(seed, c):
    # The luminance factor depends on absolute means, so only the
    # contrast-structure factor is shift invariant.
    rng = np.random.default_rng(seed)
    a, b = rng.random((16, 16)), rng.random((16, 16))
    np.testing.assert_allclose(contrast_structure_map(a + c, b + c), contrast_structure_map(a, b),
                               atol=1e-9)


def test_full_ssim_not_shift_invariant():
    rng = np.random.default_rng(4)
    a = rng.random((16, 16)) * 0.2
    b = np.clip(a + 0.05 * rng.normal(size=a.shape), 0, 1)
    assert abs(ssim(a + 0.5, b + 0.5) - ssim(a, b)) > 1e-6
    assert ssim_map(a, b).shape == (6, 6)


@settings(max_examples=30)
@given(st.integers(0, 2 ** 31))
def test_rmse_triangle(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (rng.random((4, 6)) for _ in range(3))
    assert rmse(a, c) <= rmse(a, b) + rmse(b, c) + 1e-12


def test_accuracy_and_confusion():
    y = np.repeat(np.arange(10), 5)
    assert accuracy(y, y) == 1.0
    assert accuracy(np.zeros_like(y), y) == pytest.approx(0.1)
    pred = np.random.default_rng(5).integers(0, 10, size=y.size)
    cm = confusion(pred, y)
    np.testing.assert_array_equal(cm.sum(axis=1), np.bincount(y, minlength=10))
    assert np.trace(cm) / cm.sum() == pytest.approx(accuracy(pred, y))
    with pytest.raises(ValueError):
        accuracy(y[:-1], y)
    with pytest.raises(ValueError):
        confusion(y[:-1], y)
