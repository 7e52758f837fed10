"""Image agreement and classification metrics."""
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

SSIM_SIGMA = 1.5
SSIM_WIN = 11
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _same_shape(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return a, b


def _local_stats(a, b):
    # Gaussian window of 11 taps (radius 5), evaluated only where it fits.
    truncate = (SSIM_WIN // 2) / SSIM_SIGMA
    pad = SSIM_WIN // 2

    def filt(x):
        return ndimage.gaussian_filter(x, SSIM_SIGMA, truncate=truncate,
                                       mode="reflect")[pad:-pad, pad:-pad]

    if min(a.shape) < SSIM_WIN:
        raise ValueError(f"images must be at least {SSIM_WIN}x{SSIM_WIN} for SSIM")
    mu_a, mu_b = filt(a), filt(b)
    var_a = filt(a * a) - mu_a ** 2
    var_b = filt(b * b) - mu_b ** 2
    cov = filt(a * b) - mu_a * mu_b
    return mu_a, mu_b, var_a, var_b, cov


def ssim_map(a, b, data_range=1.0):
    a, b = _same_shape(a, b)
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    mu_a, mu_b, var_a, var_b, cov = _local_stats(a, b)
    lum = (2 * mu_a * mu_b + c1) / (mu_a ** 2 + mu_b ** 2 + c1)
    cs = (2 * cov + c2) / (var_a + var_b + c2)
    return lum * cs


def contrast_structure_map(a, b, data_range=1.0):
    a, b = _same_shape(a, b)
    c2 = (SSIM_K2 * data_range) ** 2
    _, _, var_a, var_b, cov = _local_stats(a, b)
    return (2 * cov + c2) / (var_a + var_b + c2)


def ssim(a, b, data_range=1.0):
    """Mean structural similarity: Gaussian window (sigma 1.5, 11 taps),
    K1=0.01, K2=0.03, averaged over positions where the window fits."""
    return float(ssim_map(a, b, data_range).mean())


def rmse(a, b):
    a, b = _same_shape(a, b)
    return float(np.sqrt(np.mean((a - b) ** 2)))


@dataclass
class AgreementReport:
    ssim: float
    rmse: float
    per_kernel: dict = field(default_factory=dict)

    def to_dict(self):
        return {"ssim": self.ssim, "rmse": self.rmse, "per_kernel": self.per_kernel}


def agreement(a, b):
    return AgreementReport(ssim(a, b), rmse(a, b))


def accuracy(predictions, labels):
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ValueError(f"{len(predictions)} predictions for {len(labels)} labels")
    if labels.size == 0:
        raise ValueError("no predictions")
    return float(np.mean(predictions == labels))


def confusion(predictions, labels, num_classes=10):
    """Counts with true class on rows, predicted class on columns."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ValueError(f"{len(predictions)} predictions for {len(labels)} labels")
    out = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(out, (labels, predictions), 1)
    return out
