"""Pluggable reference pathology segmenters.

A reference segmenter is any deterministic, stateless callable mapping a
Volume to a ProbVolume of estimated pathology.  Third-party models trained
on real images plug in through this interface; the built-in threshold
segmenter below is a dependency-free stand-in for tests and the toy trainer.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from .filters import gaussian_smooth
from .grid import ProbVolume, Volume


@runtime_checkable
class ReferenceSegmenter(Protocol):
    def __call__(self, image: Volume) -> ProbVolume: ...


@dataclass(frozen=True)
class ThresholdSegmenter:
    """Median/MAD outlier detector with Gaussian smoothing.

    Flags voxels whose intensity deviates from the brain-tissue median by
    more than deviation_factor times the median absolute deviation, smooths
    the indicator, and restricts the result to the brain mask (voxels > 0).
    """

    deviation_factor: float = 3.0
    smoothing_sigma: float = 1.0

    def __call__(self, image: Volume) -> ProbVolume:
        data = image.data.astype(np.float64)
        brain = data > 0
        if not brain.any():
            return ProbVolume(np.zeros(image.dims, np.float32), image.spacing, image.affine)
        med = float(np.median(data[brain]))
        mad = float(np.median(np.abs(data[brain] - med)))
        outlier = (np.abs(data - med) > self.deviation_factor * mad) & brain
        smooth = gaussian_smooth(outlier.astype(np.float64), self.smoothing_sigma)
        smooth = np.clip(smooth * brain, 0.0, 1.0)
        return ProbVolume(smooth.astype(np.float32), image.spacing, image.affine)
