"""Pure training-objective kernels: synthesis loss, implicit pathology loss,
and the weighted total.

The synthesis loss compares predicted anatomy/pathology images against their
ground-truth targets with an L1 term plus a weighted L1 term on forward-
difference gradients, summed over the samples of a mini-batch.  Availability
flags gate each modality exactly: an inactive modality contributes a literal
0.0 no matter what its predictions contain.

The implicit pathology loss never touches gold-standard lesion annotations.
It passes predicted and ground-truth images through frozen reference
segmenters and penalizes disagreement of the *estimated* pathology maps with
an even blend of soft-Dice and binary cross-entropy.

Terms reduce with per-voxel means by default so magnitudes are comparable
across grid sizes; ``reduction="sum"`` switches to raw sums.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import GridMismatchError, VolumeError
from .grid import ProbVolume, Volume, same_grid
from .segment import ReferenceSegmenter

DICE_EPS = 1e-6
BCE_CLAMP = 1e-7

TargetPair = tuple[Volume | None, Volume | None]


@dataclass(frozen=True)
class LossWeights:
    """Gradient-term weight and the scheduled pathology-loss weight.

    The pathology weight starts at omega_initial and switches to omega_final
    once the iteration counter reaches omega_switch.
    """

    lam: float = 1.0
    omega_initial: float = 0.1
    omega_final: float = 1.0
    omega_switch: int = 100_000

    def __post_init__(self) -> None:
        if self.lam < 0 or self.omega_initial < 0 or self.omega_final < 0:
            raise VolumeError("loss weights must be >= 0")

    def omega_at(self, iteration: int) -> float:
        return self.omega_initial if iteration < self.omega_switch else self.omega_final


@dataclass
class SynthPrediction:
    """One sample's predicted anatomy and pathology images."""

    pred_anat: Volume
    pred_pathol: Volume


@dataclass
class SampleSynthTerms:
    anat_l1: float = 0.0
    anat_grad: float = 0.0
    pathol_l1: float = 0.0
    pathol_grad: float = 0.0


def spatial_gradient(v: Volume) -> tuple[Volume, Volume, Volume]:
    """Forward-difference gradients along x, y, z; the last slice of each
    axis is zero (replicated boundary)."""
    out = []
    for axis in range(3):
        g = np.zeros_like(v.data)
        src = [slice(None)] * 3
        dst = [slice(None)] * 3
        src[axis] = slice(1, None)
        dst[axis] = slice(None, -1)
        g[tuple(dst)] = v.data[tuple(src)] - v.data[tuple(dst)]
        out.append(Volume(g, v.spacing, v.affine))
    return out[0], out[1], out[2]


def _reduce(arr: np.ndarray, reduction: str) -> float:
    if reduction == "mean":
        return float(arr.mean(dtype=np.float64))
    if reduction == "sum":
        return float(arr.sum(dtype=np.float64))
    raise VolumeError(f"unknown reduction: {reduction!r}")


def _abs_diff(a: Volume, b: Volume) -> np.ndarray:
    return np.abs(a.data.astype(np.float64) - b.data.astype(np.float64))


def _grad_abs_diff(a: Volume, b: Volume) -> np.ndarray:
    ga = spatial_gradient(a)
    gb = spatial_gradient(b)
    return np.stack(
        [np.abs(x.data.astype(np.float64) - y.data.astype(np.float64)) for x, y in zip(ga, gb)]
    )


def _check_pair(pred: Volume, target: Volume | None, flag: int, name: str) -> None:
    if flag and target is None:
        raise VolumeError(f"{name} target missing while its availability flag is 1")
    if flag and not same_grid(pred, target):
        raise GridMismatchError(f"{name} prediction and target are on different grids")


def _broadcast_targets(
    targets: Sequence[TargetPair] | TargetPair, n: int
) -> list[TargetPair]:
    if isinstance(targets, tuple) and (targets and not isinstance(targets[0], tuple)):
        targets = [targets]  # single pair
    targets = list(targets)  # type: ignore[arg-type]
    if len(targets) == 1 and n > 1:
        targets = targets * n
    if len(targets) != n:
        raise VolumeError(f"{n} predictions but {len(targets)} target pairs")
    return targets


def synthesis_loss(
    batch_preds: Sequence[SynthPrediction],
    targets: Sequence[TargetPair] | TargetPair,
    alpha: int,
    beta: int,
    lam: float = 1.0,
    reduction: str = "mean",
) -> tuple[float, list[SampleSynthTerms]]:
    """Dual-guidance reconstruction loss over a mini-batch.

    Returns the scalar loss
    ``alpha * sum_i (L1_anat_i + lam * grad_anat_i) + beta * sum_i (...)``
    and the per-sample term breakdown.  The reported total is exactly the
    sum of the reported per-sample entries.
    """
    if alpha not in (0, 1) or beta not in (0, 1):
        raise VolumeError("availability flags must be 0 or 1")
    targets = _broadcast_targets(targets, len(batch_preds))

    breakdown: list[SampleSynthTerms] = []
    total = 0.0
    for pred, (t_anat, t_pathol) in zip(batch_preds, targets):
        terms = SampleSynthTerms()
        if alpha:
            _check_pair(pred.pred_anat, t_anat, alpha, "anatomy")
            terms.anat_l1 = _reduce(_abs_diff(pred.pred_anat, t_anat), reduction)
            terms.anat_grad = _reduce(_grad_abs_diff(pred.pred_anat, t_anat), reduction)
            total += terms.anat_l1 + lam * terms.anat_grad
        if beta:
            _check_pair(pred.pred_pathol, t_pathol, beta, "pathology")
            terms.pathol_l1 = _reduce(_abs_diff(pred.pred_pathol, t_pathol), reduction)
            terms.pathol_grad = _reduce(_grad_abs_diff(pred.pred_pathol, t_pathol), reduction)
            total += terms.pathol_l1 + lam * terms.pathol_grad
        breakdown.append(terms)
    return total, breakdown


def soft_dice_loss(pred_map: ProbVolume, ref_map: ProbVolume, eps: float = DICE_EPS) -> float:
    """1 - (2 * sum(p*q) + eps) / (sum(p) + sum(q) + eps); symmetric in (p, q)."""
    p = pred_map.data.astype(np.float64)
    q = ref_map.data.astype(np.float64)
    num = 2.0 * float((p * q).sum()) + eps
    den = float(p.sum()) + float(q.sum()) + eps
    return 1.0 - num / den


def binary_cross_entropy(
    pred_map: ProbVolume, ref_map: ProbVolume, clamp: float = BCE_CLAMP
) -> float:
    """Mean BCE of predicted probabilities against reference probabilities.

    Predictions are clamped to [clamp, 1 - clamp]; references are not, so
    the function is intentionally asymmetric in its arguments.
    """
    p = np.clip(pred_map.data.astype(np.float64), clamp, 1.0 - clamp)
    q = ref_map.data.astype(np.float64)
    ll = q * np.log(p) + (1.0 - q) * np.log(1.0 - p)
    return float(-ll.mean())


def seg_loss(pred_map: ProbVolume, ref_map: ProbVolume) -> float:
    """Even blend of soft-Dice loss and binary cross-entropy."""
    if not same_grid(pred_map, ref_map):
        raise GridMismatchError("segmentation maps are on different grids")
    return 0.5 * soft_dice_loss(pred_map, ref_map) + 0.5 * binary_cross_entropy(pred_map, ref_map)


@dataclass
class SampleSegTerms:
    anat: float = 0.0
    pathol: float = 0.0


def implicit_pathology_loss(
    batch_preds: Sequence[SynthPrediction],
    targets: Sequence[TargetPair] | TargetPair,
    seg_anat: ReferenceSegmenter,
    seg_pathol: ReferenceSegmenter,
    alpha: int,
    beta: int,
) -> tuple[float, list[SampleSegTerms]]:
    """Alignment of estimated pathology maps between predictions and targets.

    Reference maps of ground-truth images are computed once per distinct
    target volume and reused across the batch.
    """
    if alpha not in (0, 1) or beta not in (0, 1):
        raise VolumeError("availability flags must be 0 or 1")
    targets = _broadcast_targets(targets, len(batch_preds))

    ref_cache: dict[int, ProbVolume] = {}

    def ref_map(segmenter: ReferenceSegmenter, vol: Volume) -> ProbVolume:
        key = id(vol)
        if key not in ref_cache:
            ref_cache[key] = segmenter(vol)
        return ref_cache[key]

    breakdown: list[SampleSegTerms] = []
    total = 0.0
    for pred, (t_anat, t_pathol) in zip(batch_preds, targets):
        terms = SampleSegTerms()
        if alpha:
            _check_pair(pred.pred_anat, t_anat, alpha, "anatomy")
            terms.anat = seg_loss(seg_anat(pred.pred_anat), ref_map(seg_anat, t_anat))
            total += terms.anat
        if beta:
            _check_pair(pred.pred_pathol, t_pathol, beta, "pathology")
            terms.pathol = seg_loss(seg_pathol(pred.pred_pathol), ref_map(seg_pathol, t_pathol))
            total += terms.pathol
        breakdown.append(terms)
    return total, breakdown


def total_loss(l_synth: float, l_pathol: float, weights: LossWeights, iteration: int) -> float:
    """Synthesis loss plus the scheduled pathology weight times the pathology loss."""
    return l_synth + weights.omega_at(iteration) * l_pathol


@dataclass
class LossReport:
    """All loss terms of one mini-batch, serializable as one JSON line."""

    l_anat: float
    l_pathol: float
    l_synth: float
    l_seg_anat: float
    l_seg_pathol: float
    l_pathol_total: float
    omega: float
    total: float
    iteration: int = 0
    per_sample: list[dict] = field(default_factory=list)
    metrics: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return asdict(self)

    def to_json_line(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)

    @classmethod
    def from_record(cls, record: dict) -> "LossReport":
        return cls(**record)


def build_loss_report(
    batch_preds: Sequence[SynthPrediction],
    targets: Sequence[TargetPair] | TargetPair,
    alpha: int,
    beta: int,
    weights: LossWeights,
    iteration: int,
    seg_anat: ReferenceSegmenter,
    seg_pathol: ReferenceSegmenter,
    reduction: str = "mean",
) -> LossReport:
    """Evaluate every objective term for one batch and assemble the report."""
    targets = _broadcast_targets(targets, len(batch_preds))
    synth_total, synth_terms = synthesis_loss(
        batch_preds, targets, alpha, beta, weights.lam, reduction
    )
    seg_total, seg_terms = implicit_pathology_loss(
        batch_preds, targets, seg_anat, seg_pathol, alpha, beta
    )

    l_anat = sum(t.anat_l1 + weights.lam * t.anat_grad for t in synth_terms)
    l_pathol = sum(t.pathol_l1 + weights.lam * t.pathol_grad for t in synth_terms)
    l_seg_anat = sum(t.anat for t in seg_terms)
    l_seg_pathol = sum(t.pathol for t in seg_terms)
    omega = weights.omega_at(iteration)
    per_sample = [
        {**asdict(s), **{f"seg_{k}": v for k, v in asdict(g).items()}}
        for s, g in zip(synth_terms, seg_terms)
    ]
    return LossReport(
        l_anat=l_anat,
        l_pathol=l_pathol,
        l_synth=synth_total,
        l_seg_anat=l_seg_anat,
        l_seg_pathol=l_seg_pathol,
        l_pathol_total=seg_total,
        omega=omega,
        total=total_loss(synth_total, seg_total, weights, iteration),
        iteration=iteration,
        per_sample=per_sample,
    )


def append_loss_record(path: str | Path, report: LossReport) -> None:
    """Append one report to a line-oriented structured log."""
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(report.to_json_line() + "\n")


def read_loss_records(path: str | Path) -> list[LossReport]:
    reports = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                reports.append(LossReport.from_record(json.loads(line)))
    return reports
