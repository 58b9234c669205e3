"""Generator configuration: one serializable record drives the whole pipeline.

The config is a human-editable JSON document merged with CLI flag overrides
(flags win).  It is also embedded in every written sample's metadata so a
sample can be regenerated bit-identically from the record alone plus the
source subject.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .corrupt import CorruptionSpec
from .deform import DeformConfig
from .errors import VolumeError
from .grid import TissueClass

CONFIG_SCHEMA_VERSION = 1


def _default_mean_ranges() -> dict[TissueClass, tuple[float, float]]:
    ranges = {cls: (0.05, 0.95) for cls in TissueClass}
    ranges[TissueClass.BACKGROUND] = (0.0, 0.0)
    return ranges


def _default_std_ranges() -> dict[TissueClass, tuple[float, float]]:
    ranges = {cls: (0.0, 0.05) for cls in TissueClass}
    ranges[TissueClass.BACKGROUND] = (0.0, 0.0)
    return ranges


@dataclass(frozen=True)
class ContrastPrior:
    """Per-tissue-class sampling ranges for the per-label Gaussian parameters."""

    mean_ranges: dict[TissueClass, tuple[float, float]] = field(
        default_factory=_default_mean_ranges
    )
    std_ranges: dict[TissueClass, tuple[float, float]] = field(default_factory=_default_std_ranges)

    def __post_init__(self) -> None:
        for cls in TissueClass:
            if cls not in self.mean_ranges or cls not in self.std_ranges:
                raise VolumeError(f"contrast prior missing tissue class {cls.value}")
        for lo, hi in self.mean_ranges.values():
            if not (0.0 <= lo <= hi <= 1.0):
                raise VolumeError("contrast mean ranges must satisfy 0 <= lo <= hi <= 1")
        for lo, hi in self.std_ranges.values():
            if not (0.0 <= lo <= hi):
                raise VolumeError("contrast std ranges must satisfy 0 <= lo <= hi")

    def to_dict(self) -> dict:
        return {
            "mean_ranges": {cls.value: list(r) for cls, r in self.mean_ranges.items()},
            "std_ranges": {cls.value: list(r) for cls, r in self.std_ranges.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ContrastPrior":
        return cls(
            mean_ranges={TissueClass(k): tuple(v) for k, v in d["mean_ranges"].items()},
            std_ranges={TissueClass(k): tuple(v) for k, v in d["std_ranges"].items()},
        )


@dataclass(frozen=True)
class CorruptionCaps:
    """Severity-scaled upper bounds of the corruption pipeline."""

    max_spacing_mm: float = 8.0
    bias_max: float = 0.3
    noise_max: float = 0.1
    gamma_log_max: float = 0.3

    def spec(self, severity: float, rng_seed: int) -> CorruptionSpec:
        return CorruptionSpec(
            severity=severity,
            max_spacing_mm=self.max_spacing_mm,
            bias_max=self.bias_max,
            noise_max=self.noise_max,
            gamma_log_max=self.gamma_log_max,
            rng_seed=rng_seed,
        )


@dataclass(frozen=True)
class GeneratorConfig:
    """Everything the sample pipeline needs besides the subject itself."""

    sample_size: tuple[int, int, int] = (128, 128, 128)
    batch_size: int = 4
    deform: DeformConfig = field(default_factory=DeformConfig)
    corruption: CorruptionCaps = field(default_factory=CorruptionCaps)
    contrast: ContrastPrior = field(default_factory=ContrastPrior)
    seed: int = 0
    workers: int = 1
    dataset_weights: dict[str, float] = field(default_factory=dict)
    share_deformation: bool = False  # one field per batch instead of per sample
    per_component_shift: bool = False  # pathology shift per connected component
    enforce_sample_size: bool = False  # resample subjects onto sample_size on load

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise VolumeError("batch_size must be >= 1")
        if any(n < 1 for n in self.sample_size):
            raise VolumeError("sample_size entries must be >= 1")
        if self.workers < 1:
            raise VolumeError("workers must be >= 1")

    def to_dict(self) -> dict:
        return {
            "schema_version": CONFIG_SCHEMA_VERSION,
            "sample_size": list(self.sample_size),
            "batch_size": self.batch_size,
            "deform": asdict(self.deform),
            "corruption": asdict(self.corruption),
            "contrast": self.contrast.to_dict(),
            "seed": self.seed,
            "workers": self.workers,
            "dataset_weights": dict(self.dataset_weights),
            "share_deformation": self.share_deformation,
            "per_component_shift": self.per_component_shift,
            "enforce_sample_size": self.enforce_sample_size,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        d = dict(d)
        d.pop("schema_version", None)
        known = {
            "sample_size": lambda v: tuple(v),
            "batch_size": int,
            "deform": lambda v: DeformConfig(**v),
            "corruption": lambda v: CorruptionCaps(**v),
            "contrast": ContrastPrior.from_dict,
            "seed": int,
            "workers": int,
            "dataset_weights": dict,
            "share_deformation": bool,
            "per_component_shift": bool,
            "enforce_sample_size": bool,
        }
        unknown = set(d) - set(known)
        if unknown:
            raise VolumeError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {k: known[k](v) for k, v in d.items()}
        return cls(**kwargs)


def load_config(path: str | Path) -> GeneratorConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return GeneratorConfig.from_dict(json.load(fh))


def save_config(config: GeneratorConfig, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
