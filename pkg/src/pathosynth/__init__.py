"""Deterministic pathology-encoded synthetic brain-MRI generation.

Public surface: grid primitives, the pathology encoder, deformation and
corruption stages, the per-subject sample pipeline, pure loss/metric
kernels, and NIfTI-1 dataset I/O.
"""

from .config import ContrastPrior, CorruptionCaps, GeneratorConfig, load_config, save_config
from .corrupt import CorruptionSpec, blur_sigma_for_spacing, corrupt, realized_params
from .deform import DeformConfig, DeformationField, sample_deformation, warp_labels, warp_volume
from .grid import (
    LabelVolume,
    ProbVolume,
    TissueClass,
    Volume,
    nearest_sample,
    resample,
    trilinear_sample,
)
from .losses import (
    LossReport,
    LossWeights,
    SynthPrediction,
    build_loss_report,
    implicit_pathology_loss,
    seg_loss,
    spatial_gradient,
    synthesis_loss,
    total_loss,
)
from .metrics import metric_dice, metric_l1, metric_psnr, metric_ssim, psnr_from_mse
from .pathology import (
    ContrastSpec,
    ModalityClass,
    PathologyDraw,
    ShiftDirection,
    anomaly_probability,
    enhance_pathology,
    sample_anomaly_free,
    white_gray_means,
)
from .pipeline import (
    Batch,
    GenSample,
    LabeledSubject,
    cotraining_iterator,
    generate_batch,
    generate_sample,
    severity_schedule,
)
from .segment import ReferenceSegmenter, ThresholdSegmenter

__version__ = "0.1.0"

__all__ = [
    "Batch",
    "ContrastPrior",
    "ContrastSpec",
    "CorruptionCaps",
    "CorruptionSpec",
    "DeformConfig",
    "DeformationField",
    "GenSample",
    "GeneratorConfig",
    "LabelVolume",
    "LabeledSubject",
    "LossReport",
    "LossWeights",
    "ModalityClass",
    "PathologyDraw",
    "ProbVolume",
    "ReferenceSegmenter",
    "ShiftDirection",
    "SynthPrediction",
    "ThresholdSegmenter",
    "TissueClass",
    "Volume",
    "anomaly_probability",
    "blur_sigma_for_spacing",
    "build_loss_report",
    "corrupt",
    "cotraining_iterator",
    "enhance_pathology",
    "generate_batch",
    "generate_sample",
    "implicit_pathology_loss",
    "load_config",
    "metric_dice",
    "metric_l1",
    "metric_psnr",
    "metric_ssim",
    "nearest_sample",
    "psnr_from_mse",
    "realized_params",
    "resample",
    "sample_anomaly_free",
    "sample_deformation",
    "save_config",
    "seg_loss",
    "severity_schedule",
    "spatial_gradient",
    "synthesis_loss",
    "total_loss",
    "trilinear_sample",
    "warp_labels",
    "warp_volume",
    "white_gray_means",
]
