"""Image-quality and overlap metrics on normalized volumes.

All metrics assume intensities on a [0, 1] dynamic range and accumulate in
float64.  Inputs may be Volume-like objects or bare arrays.
"""

from __future__ import annotations

import math

import numpy as np

from .filters import gaussian_kernel1d

SSIM_SIGMA = 1.5
SSIM_RADIUS = 5  # 11-tap Gaussian window
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _as_array(v) -> np.ndarray:
    return np.asarray(getattr(v, "data", v))


def metric_l1(a, b) -> float:
    """Mean absolute difference."""
    x = _as_array(a).astype(np.float64)
    y = _as_array(b).astype(np.float64)
    return float(np.mean(np.abs(x - y)))


def psnr_from_mse(mse: float, max_val: float = 1.0) -> float:
    """10 * log10(max^2 / mse); +inf when mse is zero (identical inputs)."""
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(max_val * max_val / mse)


def metric_psnr(a, b, max_val: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB.

    Identical volumes have zero MSE and report the +inf sentinel, which
    callers must render distinctly (the CLI emits a null value with an
    ``infinite`` flag).
    """
    x = _as_array(a).astype(np.float64)
    y = _as_array(b).astype(np.float64)
    mse = float(np.mean((x - y) ** 2))
    return psnr_from_mse(mse, max_val)


def _window_filter(arr: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    out = arr
    radius = len(kernel) // 2
    for axis in range(arr.ndim):
        pad = [(radius, radius) if ax == axis else (0, 0) for ax in range(arr.ndim)]
        padded = np.pad(out, pad, mode="reflect")
        acc = np.zeros_like(out)
        index = [slice(None)] * arr.ndim
        for j, w in enumerate(kernel):
            index[axis] = slice(j, j + arr.shape[axis])
            acc += w * padded[tuple(index)]
        out = acc
    return out


def metric_ssim(a, b, data_range: float = 1.0) -> float:
    """Mean local structural similarity over the volume.

    Local statistics use a Gaussian window (sigma 1.5, 11 taps per axis)
    with stabilizers C1 = (K1*L)^2, C2 = (K2*L)^2 for K1 = 0.01, K2 = 0.03.
    The window radius is cropped from the borders before averaging so the
    result is independent of boundary handling.
    """
    x = _as_array(a).astype(np.float64)
    y = _as_array(b).astype(np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    if min(x.shape) < 2 * SSIM_RADIUS + 1:
        raise ValueError(f"volume too small for the {2 * SSIM_RADIUS + 1}-tap SSIM window")

    kernel = gaussian_kernel1d(SSIM_SIGMA, SSIM_RADIUS)
    mu_x = _window_filter(x, kernel)
    mu_y = _window_filter(y, kernel)
    xx = _window_filter(x * x, kernel) - mu_x * mu_x
    yy = _window_filter(y * y, kernel) - mu_y * mu_y
    xy = _window_filter(x * y, kernel) - mu_x * mu_y

    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * xy + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (xx + yy + c2)
    ssim_map = num / den

    crop = tuple(slice(SSIM_RADIUS, n - SSIM_RADIUS) for n in x.shape)
    return float(ssim_map[crop].mean())


def metric_dice(a, b, threshold: float = 0.5) -> float:
    """Dice overlap 2|A.B| / (|A| + |B|) of masks binarized at a threshold.

    Two empty masks count as perfect agreement (1.0).
    """
    x = _as_array(a) > threshold
    y = _as_array(b) > threshold
    denom = int(x.sum()) + int(y.sum())
    if denom == 0:
        return 1.0
    inter = int(np.logical_and(x, y).sum())
    return 2.0 * inter / denom
