"""Separable Gaussian smoothing built directly from the sampled kernel.

Self-contained on purpose: the SSIM metric and the reference segmenter must
be reproducible from their formulas alone (the trainer re-implements the
identical arithmetic for its parity check), so they do not route through
scipy's filtering internals.
"""

from __future__ import annotations

import numpy as np


def gaussian_kernel1d(sigma: float, radius: int) -> np.ndarray:
    """Normalized Gaussian taps sampled at integer offsets [-radius, radius]."""
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def default_radius(sigma: float, shape: tuple[int, ...]) -> int:
    """scipy's truncation rule (4 sigma), bounded so reflect padding is valid."""
    radius = int(4.0 * sigma + 0.5)
    return max(1, min(radius, min(shape) - 1))


def gaussian_smooth(arr: np.ndarray, sigma: float, radius: int | None = None) -> np.ndarray:
    """Separable Gaussian filter with reflect (mirror) boundary handling.

    Computes in float64 regardless of input dtype.
    """
    out = np.asarray(arr, dtype=np.float64)
    if sigma <= 0:
        return out.copy()
    if radius is None:
        radius = default_radius(sigma, out.shape)
    kernel = gaussian_kernel1d(sigma, radius)
    for axis in range(out.ndim):
        out = _correlate_axis(out, kernel, axis)
    return out


def _correlate_axis(arr: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    radius = len(kernel) // 2
    pad = [(radius, radius) if ax == axis else (0, 0) for ax in range(arr.ndim)]
    padded = np.pad(arr, pad, mode="reflect")
    out = np.zeros_like(arr)
    index = [slice(None)] * arr.ndim
    for j, w in enumerate(kernel):
        index[axis] = slice(j, j + arr.shape[axis])
        out += w * padded[tuple(index)]
    return out
