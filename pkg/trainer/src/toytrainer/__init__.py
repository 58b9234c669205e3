"""Toy-scale trainer consuming the pathosynth on-disk sample layout."""

from .kernels import Schedules, implicit_pathology_loss, seg_loss, synthesis_loss, total_loss
from .model import ToyEncoderDecoder
from .samples import TrainBatch, build_batches, discover_samples
from .train import ToyTrainConfig, eval_toy, loss_trend_decreasing, train_toy

__all__ = [
    "Schedules",
    "ToyEncoderDecoder",
    "ToyTrainConfig",
    "TrainBatch",
    "build_batches",
    "discover_samples",
    "eval_toy",
    "implicit_pathology_loss",
    "loss_trend_decreasing",
    "seg_loss",
    "synthesis_loss",
    "total_loss",
    "train_toy",
]
