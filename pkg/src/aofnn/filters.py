"""Fourier-plane mask presets, a synthetic image corpus and the
hybrid-image (low/high frequency split) demo."""
import numpy as np
import scipy.fft as sfft

from .field_math import fft2o, ifft2o
from .metrics import agreement
from .optics import CameraSpec, ideal_filter, nominal_config, propagate_4f

PRESETS = ("lowpass", "highpass", "annulus", "bandstop", "vertical_edges")


def radial_frequency(rows, cols):
    """Distance of each centred-spectrum bin from DC, normalised so the
    band edge along the shorter axis is 1."""
    kr = (np.arange(rows) - rows // 2) / (rows / 2)
    kc = (np.arange(cols) - cols // 2) / (cols / 2)
    return np.hypot(kr[:, None], kc[None, :])


def mask_preset(name, rows, cols, cutoff=0.15, width=0.2):
    """Binary ``dc_at_center`` mask. ``cutoff`` and ``width`` are fractions
    of the half band."""
    rho = radial_frequency(rows, cols)
    if name == "lowpass":
        m = rho <= cutoff
    elif name == "highpass":
        m = rho > cutoff
    elif name == "annulus":
        m = (rho > cutoff) & (rho <= cutoff + width)
    elif name == "bandstop":
        m = (rho <= cutoff) | (rho > cutoff + width)
    elif name == "vertical_edges":
        kc = np.abs(np.arange(cols) - cols // 2) / (cols / 2)
        m = np.broadcast_to(kc > cutoff, (rows, cols))
    else:
        raise ValueError(f"unknown mask preset {name!r}; choose from {PRESETS}")
    return m.astype(np.float64)


def synthetic_building(rows=208, cols=208, seed=0):
    """Greyscale facade: a bright block with a grid of dark windows, a
    darker roof band and a soft sky gradient."""
    rng = np.random.default_rng(seed)
    y = np.linspace(0, 1, rows)[:, None]
    x = np.linspace(0, 1, cols)[None, :]
    img = 0.25 + 0.2 * (1 - y) + 0.0 * x
    top, left, right = int(0.25 * rows), int(0.12 * cols), int(0.88 * cols)
    img[top:, left:right] = 0.75
    img[top:top + max(2, rows // 20), left:right] = 0.45
    win_h, win_w = max(2, rows // 16), max(2, cols // 20)
    for r in range(top + rows // 10, rows - win_h, rows // 8):
        for c in range(left + cols // 25, right - win_w, cols // 9):
            img[r:r + win_h, c:c + win_w] = 0.1 + 0.1 * rng.random()
    door = slice(cols // 2 - cols // 24, cols // 2 + cols // 24)
    img[rows - rows // 7:, door] = 0.05
    return np.clip(img, 0, 1)


def synthetic_mascot(rows=208, cols=208):
    """Disk, ring and a diagonal bar on a dark background."""
    y, x = np.mgrid[0:rows, 0:cols]
    cy, cx = rows / 2, cols / 2
    r = np.hypot(y - cy, x - cx) / min(rows, cols)
    img = np.where(r < 0.18, 0.9, 0.15)
    img = np.where((r > 0.28) & (r < 0.34), 0.7, img)
    bar = np.abs((y - cy) - (x - cx)) < 0.04 * rows
    img = np.where(bar & (r < 0.45), 0.5, img)
    return img.astype(np.float64)


def filter_corpus(rows=208, cols=208):
    return {"building": synthetic_building(rows, cols), "mascot": synthetic_mascot(rows, cols)}


def normalise_peak(img):
    peak = np.max(img)
    return img / peak if peak > 0 else np.zeros_like(img)


def compose_hybrid(low_source, high_source, cutoff):
    """Low band of ``low_source`` plus high band of ``high_source``, offset
    and scaled into [0, 1] so a DMD can display it. Returns the hybrid and
    the (low, high) band components on the same scale."""
    rows, cols = low_source.shape
    lp = mask_preset("lowpass", rows, cols, cutoff=cutoff)
    lp_corner = sfft.ifftshift(lp)
    low = ifft2o(fft2o(low_source) * lp_corner).real
    high = ifft2o(fft2o(high_source) * (1 - lp_corner)).real
    hybrid = low + high
    lo, hi = hybrid.min(), hybrid.max()
    scale = 1.0 / (hi - lo) if hi > lo else 1.0
    offset = -lo if lo < 0 else 0.0
    # The offset is pure DC, so it belongs to the low band.
    return (hybrid + offset) * scale, ((low + offset) * scale, high * scale)


def separate_hybrid(hybrid, cutoff, config=None):
    """Recover the two bands with complementary Fourier masks.

    The camera sees intensity, so the returned recoveries are field
    amplitudes ``sqrt(I)``. ``config=None`` uses the ideal pipeline.
    """
    rows, cols = hybrid.shape
    lp = mask_preset("lowpass", rows, cols, cutoff=cutoff)
    masks = np.stack([lp, 1 - lp])
    if config is None:
        out = ideal_filter(hybrid, masks)
    else:
        out = propagate_4f(hybrid, masks, config, detect=False)
    return np.sqrt(np.maximum(out[0], 0)), np.sqrt(np.maximum(out[1], 0))


def filter_bench_config(subpixel_factor=17):
    """Nominal bench with the camera on auto-exposure, as used for
    image-filtering runs where outputs are compared after peak scaling."""
    return nominal_config(subpixel_factor=subpixel_factor, camera=CameraSpec(exposure=None))


def compare_to_ideal(image, mask, config, rng=None):
    """Filter ``image`` on the bench and with the ideal oracle; returns the
    camera frame, the peak-normalised oracle and their agreement."""
    physical = propagate_4f(image, mask, config, rng=rng)
    ideal = normalise_peak(ideal_filter(image, mask))
    return physical, ideal, agreement(physical, ideal)
