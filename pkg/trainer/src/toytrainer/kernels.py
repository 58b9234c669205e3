"""Torch re-implementation of the training objectives.

These kernels mirror the generator package's loss arithmetic step for step
(float64 accumulation, float32 forward-difference gradients, identical
segmenter numerics including the float32 round-trip of probability maps),
so loss values agree with the reference kernels to well below 1e-5
relative on identical inputs.  Where an operation has no useful gradient
(the hard threshold inside the reference segmenter), the value is still
computed and weighted; optimization is driven by the synthesis terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F

DICE_EPS = 1e-6
BCE_CLAMP = 1e-7


def forward_gradient(volume: torch.Tensor) -> torch.Tensor:
    """Forward differences along the 3 trailing axes, last slice zero.

    Differences are taken in float32 to match the reference volumes' dtype;
    returns a stacked tensor of shape (3, *volume.shape).
    """
    v32 = volume.to(torch.float32)
    grads = []
    for axis in range(-3, 0):
        g = torch.zeros_like(v32)
        n = v32.shape[axis]
        g.narrow(axis, 0, n - 1).copy_(
            v32.narrow(axis, 1, n - 1) - v32.narrow(axis, 0, n - 1)
        )
        grads.append(g)
    return torch.stack(grads)


def synthesis_terms(pred: torch.Tensor, target: torch.Tensor, lam: float) -> torch.Tensor:
    """Per-modality term: mean |pred - target| + lam * mean |grad difference|."""
    l1 = (pred.double() - target.double()).abs().mean()
    gp = forward_gradient(pred)
    gt = forward_gradient(target)
    grad = (gp.double() - gt.double()).abs().mean()
    return l1 + lam * grad


def synthesis_loss(
    pred_anat: torch.Tensor,
    pred_pathol: torch.Tensor,
    target_anat: torch.Tensor | None,
    target_pathol: torch.Tensor | None,
    alpha: int,
    beta: int,
    lam: float,
) -> torch.Tensor:
    """Batch synthesis loss; tensors are (N, D, H, W), summed over samples."""
    total = torch.zeros((), dtype=torch.float64)
    n = pred_anat.shape[0]
    for i in range(n):
        if alpha:
            total = total + synthesis_terms(pred_anat[i], target_anat[i], lam)
        if beta:
            total = total + synthesis_terms(pred_pathol[i], target_pathol[i], lam)
    return total


def _median(values: torch.Tensor) -> torch.Tensor:
    """numpy-style median: mean of the two middle order statistics."""
    flat, _ = torch.sort(values.reshape(-1))
    n = flat.numel()
    if n % 2:
        return flat[n // 2]
    return (flat[n // 2 - 1] + flat[n // 2]) / 2.0


def gaussian_smooth(volume: torch.Tensor, sigma: float) -> torch.Tensor:
    """Separable Gaussian with reflect padding, sampled-kernel taps,
    radius int(4*sigma + 0.5) bounded by the smallest axis."""
    out = volume.double()
    if sigma <= 0:
        return out.clone()
    radius = max(1, min(int(4.0 * sigma + 0.5), min(out.shape) - 1))
    x = torch.arange(-radius, radius + 1, dtype=torch.float64)
    kernel = torch.exp(-0.5 * (x / sigma) ** 2)
    kernel = kernel / kernel.sum()
    for axis in range(3):
        pad = [0, 0, 0, 0, 0, 0]
        pad[2 * (2 - axis)] = radius
        pad[2 * (2 - axis) + 1] = radius
        padded = F.pad(out.unsqueeze(0).unsqueeze(0), pad, mode="reflect")[0, 0]
        acc = torch.zeros_like(out)
        for j in range(2 * radius + 1):
            acc = acc + kernel[j] * padded.narrow(axis, j, out.shape[axis])
        out = acc
    return out


def threshold_segmenter(
    image: torch.Tensor, deviation_factor: float = 3.0, smoothing_sigma: float = 1.0
) -> torch.Tensor:
    """Median/MAD outlier map restricted to the brain mask; returns float32
    probabilities exactly like the reference segmenter."""
    data = image.detach().double()
    brain = data > 0
    if not bool(brain.any()):
        return torch.zeros_like(data, dtype=torch.float32)
    med = _median(data[brain])
    mad = _median((data[brain] - med).abs())
    outlier = ((data - med).abs() > deviation_factor * mad) & brain
    smooth = gaussian_smooth(outlier.double(), smoothing_sigma)
    return torch.clamp(smooth * brain, 0.0, 1.0).to(torch.float32)


def soft_dice_loss(p: torch.Tensor, q: torch.Tensor) -> torch.Tensor:
    p = p.double()
    q = q.double()
    num = 2.0 * (p * q).sum() + DICE_EPS
    den = p.sum() + q.sum() + DICE_EPS
    return 1.0 - num / den


def binary_cross_entropy(p: torch.Tensor, q: torch.Tensor) -> torch.Tensor:
    p = torch.clamp(p.double(), BCE_CLAMP, 1.0 - BCE_CLAMP)
    q = q.double()
    return -(q * torch.log(p) + (1.0 - q) * torch.log(1.0 - p)).mean()


def seg_loss(p: torch.Tensor, q: torch.Tensor) -> torch.Tensor:
    return 0.5 * soft_dice_loss(p, q) + 0.5 * binary_cross_entropy(p, q)


def implicit_pathology_loss(
    pred_anat: torch.Tensor,
    pred_pathol: torch.Tensor,
    target_anat: torch.Tensor | None,
    target_pathol: torch.Tensor | None,
    alpha: int,
    beta: int,
) -> torch.Tensor:
    total = torch.zeros((), dtype=torch.float64)
    for i in range(pred_anat.shape[0]):
        if alpha:
            total = total + seg_loss(
                threshold_segmenter(pred_anat[i]), threshold_segmenter(target_anat[i])
            )
        if beta:
            total = total + seg_loss(
                threshold_segmenter(pred_pathol[i]), threshold_segmenter(target_pathol[i])
            )
    return total


@dataclass(frozen=True)
class Schedules:
    """Loss weighting and learning-rate schedule, same shape as full scale."""

    lam: float = 1.0
    omega_initial: float = 0.1
    omega_final: float = 1.0
    omega_switch: int = 100_000  # in steps; toy runs stay in the initial phase
    lr_initial: float = 1e-4
    lr_final: float = 1e-5
    lr_switch_frac: float = 160_000 / 240_000

    def omega_at(self, step: int) -> float:
        return self.omega_initial if step < self.omega_switch else self.omega_final

    def lr_at(self, step: int, total_steps: int) -> float:
        return self.lr_initial if step < self.lr_switch_frac * total_steps else self.lr_final


def total_loss(l_synth: torch.Tensor, l_pathol: torch.Tensor, omega: float) -> torch.Tensor:
    return l_synth + omega * l_pathol


def psnr(a, b, max_val: float = 1.0) -> float:
    import numpy as np

    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    mse = float(((x - y) ** 2).mean())
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(max_val * max_val / mse)


def l1(a, b) -> float:
    import numpy as np

    return float(np.abs(np.asarray(a, np.float64) - np.asarray(b, np.float64)).mean())


def ssim(a, b, data_range: float = 1.0) -> float:
    """Mean local SSIM, Gaussian window sigma 1.5 / 11 taps, borders cropped."""
    import numpy as np

    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    radius, sigma = 5, 1.5
    taps = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (taps / sigma) ** 2)
    kernel /= kernel.sum()

    def filt(arr):
        out = arr
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

    mu_x, mu_y = filt(x), filt(y)
    xx = filt(x * x) - mu_x * mu_x
    yy = filt(y * y) - mu_y * mu_y
    xy = filt(x * y) - mu_x * mu_y
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    smap = ((2 * mu_x * mu_y + c1) * (2 * xy + c2)) / (
        (mu_x**2 + mu_y**2 + c1) * (xx + yy + c2)
    )
    crop = tuple(slice(radius, n - radius) for n in x.shape)
    return float(smap[crop].mean())
