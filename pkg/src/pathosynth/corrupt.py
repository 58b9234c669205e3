"""Acquisition-corruption pipeline, parameterized by a single severity scalar.

Fixed sub-step order:

1. anti-alias Gaussian blur matched to the simulated slice spacing,
2. downsample to the simulated spacing, then resample back to the grid,
3. multiply by a smooth bias field with zero-mean log over the brain,
4. add i.i.d. Gaussian noise (then clamp back into the valid range so the
   gamma step stays inside its log domain),
5. gamma transform x ** g with g = exp(N(0, gamma_log_std^2)),
6. clamp to [0, 1].

All realized magnitudes are drawn from the spec seed in a fixed order, so a
CorruptionSpec fully determines the output.  Severity 0 disables every step
and returns the input bit-exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import VolumeError
from .grid import Volume, dims_for_spacing, resample, upsample_lattice

_BIAS_GRID = 4  # control points per axis of the log-bias lattice


@dataclass(frozen=True)
class CorruptionSpec:
    """Severity plus the caps that severity scales.

    At severity s the realized parameters are drawn uniformly from
    [native, native + s * (max_spacing_mm - native)] per axis for the
    simulated spacing and [0, cap * s] for bias/noise/gamma strengths.
    """

    severity: float
    max_spacing_mm: float = 8.0
    bias_max: float = 0.3
    noise_max: float = 0.1
    gamma_log_max: float = 0.3
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.severity <= 1.0:
            raise VolumeError(f"severity must be in [0, 1], got {self.severity}")
        for name in ("max_spacing_mm", "bias_max", "noise_max", "gamma_log_max"):
            if getattr(self, name) < 0:
                raise VolumeError(f"corruption cap {name} must be >= 0")


@dataclass(frozen=True)
class RealizedCorruption:
    """The magnitudes actually drawn for one corrupt() call."""

    target_spacing_mm: tuple[float, float, float]
    bias_log_std: float
    noise_std: float
    gamma_log_std: float


def blur_sigma_for_spacing(target_spacing, native_spacing) -> np.ndarray:
    """Anti-aliasing sigma in voxels: 0.85 * (target/native - 1) / 2, floored at 0."""
    t = np.asarray(target_spacing, dtype=np.float64)
    n = np.asarray(native_spacing, dtype=np.float64)
    return np.maximum(0.85 * (t / n - 1.0) / 2.0, 0.0)


def draw_corruption(spec: CorruptionSpec, native_spacing) -> tuple[RealizedCorruption, np.random.Generator]:
    """Draw realized magnitudes; the returned generator continues the stream
    for the field/noise draws so corrupt() is a pure function of the spec."""
    rng = np.random.default_rng(spec.rng_seed)
    native = np.asarray(native_spacing, dtype=np.float64)
    upper = native + spec.severity * np.maximum(spec.max_spacing_mm - native, 0.0)
    target = rng.uniform(native, upper)
    bias = float(rng.uniform(0.0, spec.bias_max * spec.severity))
    noise = float(rng.uniform(0.0, spec.noise_max * spec.severity))
    gamma = float(rng.uniform(0.0, spec.gamma_log_max * spec.severity))
    realized = RealizedCorruption(tuple(float(x) for x in target), bias, noise, gamma)
    return realized, rng


def realized_params(spec: CorruptionSpec, native_spacing) -> RealizedCorruption:
    """Magnitudes corrupt() will use, for logging and sample metadata."""
    realized, _ = draw_corruption(spec, native_spacing)
    return realized


def corrupt(image: Volume, spec: CorruptionSpec) -> Volume:
    """Apply the corruption pipeline; deterministic given (input, spec)."""
    lo, hi = float(image.data.min()), float(image.data.max())
    if lo < 0.0 or hi > 1.0:
        raise VolumeError(f"corrupt() expects intensities in [0, 1], got [{lo}, {hi}]")
    if spec.severity == 0.0:
        return Volume(image.data.copy(), image.spacing, image.affine)

    realized, rng = draw_corruption(spec, image.spacing)
    data = image.data
    brain = data > 0

    sigma = blur_sigma_for_spacing(realized.target_spacing_mm, image.spacing)
    if np.any(sigma > 0):
        data = ndimage.gaussian_filter(data, sigma=sigma, mode="nearest")

    if any(t != s for t, s in zip(realized.target_spacing_mm, image.spacing)):
        low_dims = dims_for_spacing(image.dims, image.spacing, realized.target_spacing_mm)
        low = resample(Volume(data, image.spacing, image.affine), low_dims, realized.target_spacing_mm)
        data = resample(low, image.dims, image.spacing).data

    if realized.bias_log_std > 0:
        lattice = rng.normal(0.0, realized.bias_log_std, size=(_BIAS_GRID,) * 3)
        log_field = upsample_lattice(lattice, image.dims).astype(np.float64)
        bias_field = np.exp(log_field)
        mean_ref = bias_field[brain].mean() if brain.any() else bias_field.mean()
        bias_field /= mean_ref
        data = (data * bias_field).astype(np.float32)

    if realized.noise_std > 0:
        noise = rng.standard_normal(image.dims, dtype=np.float32)
        data = data + np.float32(realized.noise_std) * noise
        data = np.clip(data, 0.0, 1.0)

    if realized.gamma_log_std > 0:
        g = math.exp(float(rng.normal(0.0, realized.gamma_log_std)))
        data = np.power(data, np.float32(g))

    data = np.clip(data, 0.0, 1.0)
    return Volume(data, image.spacing, image.affine)
