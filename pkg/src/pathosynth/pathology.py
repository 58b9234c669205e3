"""Anomaly-probability construction and pathology-encoded contrast sampling.

The generator never sees real images at training time; instead each subject
carries a soft anomaly map built once from an annotated acquisition, and the
synthetic contrast is drawn per label region and then shifted inside the
anomaly support, darkening when white matter is brighter than gray matter
and brightening otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import ndimage

from .errors import GridMismatchError, MissingLabelError, MissingTissueClassError, VolumeError
from .grid import LabelVolume, ProbVolume, TissueClass, Volume, require_same_grid


class ModalityClass(Enum):
    """Which side of the intensity convention a source image follows."""

    T1W_LIKE = "t1w"
    T2W_FLAIR_LIKE = "t2w_flair"


class ShiftDirection(Enum):
    DARKEN = "darken"
    BRIGHTEN = "brighten"


@dataclass(frozen=True)
class ContrastSpec:
    """Per-label Gaussian intensity parameters: label -> (mean, stddev)."""

    means: dict[int, tuple[float, float]]
    rng_seed: int = 0

    def __post_init__(self) -> None:
        for lab, (mu, sd) in self.means.items():
            if not 0.0 <= mu <= 1.0:
                raise VolumeError(f"label {lab}: mean {mu} outside [0, 1]")
            if sd < 0.0:
                raise VolumeError(f"label {lab}: negative stddev {sd}")


@dataclass(frozen=True)
class PathologyDraw:
    """Record of one intensity-shift draw applied inside the anomaly support."""

    delta: float
    direction: ShiftDirection
    white_mean: float
    gray_mean: float

    def __post_init__(self) -> None:
        expected = (
            ShiftDirection.DARKEN if self.white_mean > self.gray_mean else ShiftDirection.BRIGHTEN
        )
        if self.direction is not expected:
            raise VolumeError("shift direction inconsistent with tissue means")


def anomaly_probability(
    image: Volume, pathology_region: np.ndarray | ProbVolume, modality: ModalityClass
) -> ProbVolume:
    """Soft anomaly map from image intensities inside an annotated region.

    Outside the region the probability is 0.  Inside, intensities are
    min-max normalized over the region; T1w-like images map low intensity
    to high anomaly, T2w/FLAIR-like images map high intensity to high
    anomaly.  A flat region (max == min) is treated as maximally anomalous.
    """
    if isinstance(pathology_region, ProbVolume):
        require_same_grid(image, pathology_region, "image and pathology region")
        mask = pathology_region.data > 0.5
    else:
        mask = np.asarray(pathology_region).astype(bool)
        if mask.shape != image.dims:
            raise GridMismatchError(
                f"pathology region shape {mask.shape} does not match image {image.dims}"
            )

    prob = np.zeros(image.dims, dtype=np.float32)
    if mask.any():
        vals = image.data[mask].astype(np.float64)
        lo, hi = float(vals.min()), float(vals.max())
        if hi == lo:
            prob[mask] = 1.0
        else:
            t = (vals - lo) / (hi - lo)
            if modality is ModalityClass.T1W_LIKE:
                t = 1.0 - t
            prob[mask] = t.astype(np.float32)
    return ProbVolume(prob, image.spacing, image.affine)


def sample_anomaly_free(labels: LabelVolume, spec: ContrastSpec) -> Volume:
    """Draw each voxel i.i.d. from the Gaussian of its label, clamped to [0, 1].

    Deterministic given spec.rng_seed.
    """
    present = np.unique(labels.data)
    missing = [int(lab) for lab in present if int(lab) not in spec.means]
    if missing:
        raise MissingLabelError(f"contrast spec has no entry for labels {missing}")

    max_label = int(present.max())
    mu_lut = np.zeros(max_label + 1, dtype=np.float32)
    sd_lut = np.zeros(max_label + 1, dtype=np.float32)
    for lab, (mu, sd) in spec.means.items():
        if 0 <= lab <= max_label:
            mu_lut[lab] = mu
            sd_lut[lab] = sd

    rng = np.random.default_rng(spec.rng_seed)
    noise = rng.standard_normal(labels.dims, dtype=np.float32)
    out = mu_lut[labels.data] + sd_lut[labels.data] * noise
    np.clip(out, 0.0, 1.0, out=out)
    return Volume(out, labels.spacing, labels.affine)


def white_gray_means(base: Volume, labels: LabelVolume) -> tuple[float, float]:
    """Arithmetic means of the image over white-matter and gray-matter voxels."""
    require_same_grid(base, labels, "image and labels")
    means = []
    for tissue in (TissueClass.WHITE_MATTER, TissueClass.GRAY_MATTER):
        mask = labels.class_mask(tissue)
        if not mask.any():
            raise MissingTissueClassError(f"missing tissue class: {tissue.value}")
        means.append(float(base.data[mask].mean(dtype=np.float64)))
    return means[0], means[1]


def enhance_pathology(
    base: Volume,
    anomaly: ProbVolume,
    labels: LabelVolume,
    rng_seed: int,
    per_component: bool = False,
) -> tuple[Volume, PathologyDraw | list[PathologyDraw]]:
    """Shift intensities inside the anomaly support, direction-aware.

    One shift is drawn from N(-m/2, (m/2)^2) when white matter is brighter
    than gray matter (lesions darken, T1w-like) and from N(+m/2, (m/2)^2)
    otherwise (lesions brighten, T2w/FLAIR-like), where m is the white-matter
    mean of the input image.  The shift scales with the per-voxel anomaly
    probability, so voxels with zero probability are untouched bit-exactly.

    By default a single shift covers the whole image; with per_component one
    shift is drawn per connected anomaly component (an extension flag, not a
    fidelity claim).
    """
    require_same_grid(base, anomaly, "image and anomaly map")
    white_mean, gray_mean = white_gray_means(base, labels)
    half = white_mean / 2.0
    darken = white_mean > gray_mean
    mean = -half if darken else half
    direction = ShiftDirection.DARKEN if darken else ShiftDirection.BRIGHTEN

    rng = np.random.default_rng(rng_seed)
    if per_component:
        comp, ncomp = ndimage.label(anomaly.data > 0)
        deltas = rng.normal(mean, half, size=ncomp) if ncomp else np.zeros(0)
        lut = np.concatenate([[0.0], deltas]).astype(np.float32)
        shift = lut[comp] * anomaly.data
        draws: PathologyDraw | list[PathologyDraw] = [
            PathologyDraw(float(d), direction, white_mean, gray_mean) for d in deltas
        ]
    else:
        delta = float(rng.normal(mean, half))
        shift = np.float32(delta) * anomaly.data
        draws = PathologyDraw(delta, direction, white_mean, gray_mean)

    out = np.clip(base.data + shift, 0.0, 1.0)
    return Volume(out, base.spacing, base.affine), draws
