"""End-to-end per-subject generation and intra-subject batching.

One sample is: sample a deformation field, warp the subject's label map,
anomaly map and available ground-truth images with that same field, draw a
fresh contrast, shift intensities inside the warped anomaly support, and run
the corruption pipeline at the sample's severity.  A batch is N samples of
one subject with severities stratified from mild to severe.

Every stochastic stage receives a child seed derived from the sample's
master seed, so a sample is reproducible from (subject, severity, seeds)
alone, which the on-disk metadata records.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .config import GeneratorConfig
from .corrupt import corrupt
from .deform import sample_deformation, warp_labels, warp_volume
from .errors import GenerationError, VolumeError
from .grid import LabelVolume, ProbVolume, Volume, same_grid
from .pathology import ContrastSpec, PathologyDraw, enhance_pathology, sample_anomaly_free
from .rng import Stage, child_seed


@dataclass
class LabeledSubject:
    """One subject's anatomy labels, anomaly map, and optional GT images."""

    id: str
    labels: LabelVolume
    pathology: ProbVolume
    gt_anat: Volume | None = None
    gt_pathol: Volume | None = None
    dataset_tag: str = "default"

    def __post_init__(self) -> None:
        if self.gt_anat is None and self.gt_pathol is None:
            raise VolumeError(f"subject {self.id}: at least one ground-truth image is required")
        for name in ("pathology", "gt_anat", "gt_pathol"):
            vol = getattr(self, name)
            if vol is not None and not same_grid(self.labels, vol):
                raise VolumeError(f"subject {self.id}: {name} grid differs from labels grid")

    @property
    def alpha(self) -> int:
        """Anatomy ground truth available."""
        return 1 if self.gt_anat is not None else 0

    @property
    def beta(self) -> int:
        """Pathology ground truth available."""
        return 1 if self.gt_pathol is not None else 0


@dataclass(frozen=True)
class SampleSeeds:
    deform: int
    contrast: int
    pathology: int
    corruption: int

    @classmethod
    def derive(cls, master_seed: int, deform_override: int | None = None) -> "SampleSeeds":
        return cls(
            deform=deform_override
            if deform_override is not None
            else child_seed(master_seed, Stage.DEFORM),
            contrast=child_seed(master_seed, Stage.CONTRAST),
            pathology=child_seed(master_seed, Stage.PATHOLOGY),
            corruption=child_seed(master_seed, Stage.CORRUPTION),
        )


@dataclass
class DeformedTargets:
    """The sample's supervision targets, all warped by the sample's field."""

    anat: Volume | None
    pathol: Volume | None
    pathology: ProbVolume


@dataclass
class GenSample:
    """One synthesized training image plus its generation record."""

    image: Volume
    severity: float
    seeds: SampleSeeds
    deformed_targets: DeformedTargets
    subject_id: str
    alpha: int
    beta: int
    pathology_shift: PathologyDraw | list[PathologyDraw]
    master_seed: int


@dataclass
class Batch:
    """N samples of one subject, severities non-decreasing."""

    samples: list[GenSample]

    def __post_init__(self) -> None:
        if not self.samples:
            raise VolumeError("batch must contain at least one sample")
        sid = self.samples[0].subject_id
        if any(s.subject_id != sid for s in self.samples):
            raise VolumeError("batch mixes subjects")
        sev = [s.severity for s in self.samples]
        if any(b < a for a, b in zip(sev, sev[1:])):
            raise VolumeError("batch severities must be non-decreasing")

    @property
    def subject_id(self) -> str:
        return self.samples[0].subject_id


def draw_contrast_spec(labels: LabelVolume, config: GeneratorConfig, rng_seed: int) -> ContrastSpec:
    """Draw per-label Gaussian parameters from the per-tissue prior ranges."""
    prior = config.contrast
    rng = np.random.default_rng(rng_seed)
    means: dict[int, tuple[float, float]] = {}
    for lab in sorted(labels.label_table):
        cls = labels.label_table[lab]
        mu_lo, mu_hi = prior.mean_ranges[cls]
        sd_lo, sd_hi = prior.std_ranges[cls]
        means[lab] = (float(rng.uniform(mu_lo, mu_hi)), float(rng.uniform(sd_lo, sd_hi)))
    return ContrastSpec(means, rng_seed)


def _stage(name: str, subject_id: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except GenerationError:
        raise
    except Exception as exc:
        raise GenerationError(f"stage '{name}' failed for subject '{subject_id}': {exc}") from exc


def generate_from_seeds(
    subject: LabeledSubject,
    severity: float,
    seeds: SampleSeeds,
    config: GeneratorConfig,
) -> GenSample:
    """Deterministic sample generation from explicit stage seeds."""
    dims, spacing = subject.labels.dims, subject.labels.spacing

    field_ = _stage(
        "deformation", subject.id, sample_deformation, dims, spacing, config.deform, seeds.deform
    )
    warped_labels = _stage("warp-labels", subject.id, warp_labels, subject.labels, field_)
    warped_anomaly = _stage("warp-anomaly", subject.id, warp_volume, subject.pathology, field_)
    warped_anat = (
        _stage("warp-anat", subject.id, warp_volume, subject.gt_anat, field_)
        if subject.gt_anat is not None
        else None
    )
    warped_pathol = (
        _stage("warp-pathol", subject.id, warp_volume, subject.gt_pathol, field_)
        if subject.gt_pathol is not None
        else None
    )

    contrast = _stage(
        "contrast-draw", subject.id, draw_contrast_spec, warped_labels, config, seeds.contrast
    )
    base = _stage("contrast-sample", subject.id, sample_anomaly_free, warped_labels, contrast)
    encoded, shift = _stage(
        "pathology-shift",
        subject.id,
        enhance_pathology,
        base,
        warped_anomaly,
        warped_labels,
        seeds.pathology,
        config.per_component_shift,
    )

    spec = config.corruption.spec(severity, seeds.corruption)
    image = _stage("corruption", subject.id, corrupt, encoded, spec)

    return GenSample(
        image=image,
        severity=float(severity),
        seeds=seeds,
        deformed_targets=DeformedTargets(warped_anat, warped_pathol, warped_anomaly),
        subject_id=subject.id,
        alpha=subject.alpha,
        beta=subject.beta,
        pathology_shift=shift,
        master_seed=0,
    )


def generate_sample(
    subject: LabeledSubject,
    severity: float,
    master_seed: int,
    config: GeneratorConfig | None = None,
    deform_seed: int | None = None,
) -> GenSample:
    """Generate one sample; all stage seeds derive from the master seed."""
    config = config or GeneratorConfig()
    seeds = SampleSeeds.derive(master_seed, deform_override=deform_seed)
    sample = generate_from_seeds(subject, severity, seeds, config)
    sample.master_seed = master_seed
    return sample


def severity_schedule(n: int, rng_seed: int) -> list[float]:
    """Mild-to-severe severities: i/n jittered by up to half a bin width,
    clamped to [0, 1] and sorted ascending."""
    rng = np.random.default_rng(rng_seed)
    jitter = rng.uniform(-0.5 / n, 0.5 / n, size=n)
    sev = np.clip((np.arange(1, n + 1) / n) + jitter, 0.0, 1.0)
    return [float(s) for s in np.sort(sev)]


@dataclass(frozen=True)
class PlannedSample:
    """Everything that determines one sample before any volume work runs.

    Lets callers fan samples out to workers while producing bytes identical
    to a sequential generate_batch.
    """

    severity: float
    master_seed: int
    deform_seed: int | None


def plan_batch(n: int, master_seed: int, config: GeneratorConfig) -> list[PlannedSample]:
    severities = severity_schedule(n, child_seed(master_seed, Stage.SEVERITY))
    shared_deform = child_seed(master_seed, Stage.DEFORM) if config.share_deformation else None
    return [
        PlannedSample(severity, child_seed(master_seed, Stage.SAMPLE, i), shared_deform)
        for i, severity in enumerate(severities)
    ]


def generate_planned(
    subject: LabeledSubject, planned: PlannedSample, config: GeneratorConfig
) -> GenSample:
    return generate_sample(
        subject, planned.severity, planned.master_seed, config, deform_seed=planned.deform_seed
    )


def generate_batch(
    subject: LabeledSubject,
    n: int,
    master_seed: int,
    config: GeneratorConfig | None = None,
) -> Batch:
    """N intra-subject samples with stratified ascending severities."""
    config = config or GeneratorConfig()
    plan = plan_batch(n, master_seed, config)
    return Batch([generate_planned(subject, planned, config) for planned in plan])


def subject_schedule(
    subjects: Sequence[LabeledSubject],
    weights: dict[str, float] | None,
    master_seed: int,
) -> Iterator[tuple[int, int, int]]:
    """Infinite deterministic stream of (step, subject_index, batch_seed).

    Each step picks a dataset categorically by weight, then a subject
    uniformly within that dataset.
    """
    if not subjects:
        raise VolumeError("no subjects to schedule")
    tags = sorted({s.dataset_tag for s in subjects})
    weights = weights or {}
    raw = np.array([max(float(weights.get(t, 1.0)), 0.0) for t in tags], dtype=np.float64)
    if raw.sum() <= 0:
        raise VolumeError("dataset weights sum to zero")
    probs = raw / raw.sum()
    by_tag = {t: [i for i, s in enumerate(subjects) if s.dataset_tag == t] for t in tags}

    rng = np.random.default_rng(child_seed(master_seed, Stage.STREAM))
    step = 0
    while True:
        tag = tags[int(rng.choice(len(tags), p=probs))]
        members = by_tag[tag]
        idx = members[int(rng.integers(len(members)))]
        yield step, idx, child_seed(master_seed, Stage.BATCH, step)
        step += 1


def cotraining_iterator(
    subjects: Sequence[LabeledSubject],
    weights: dict[str, float] | None = None,
    master_seed: int = 0,
    config: GeneratorConfig | None = None,
) -> Iterator[Batch]:
    """Deterministic stream of batches drawn across datasets by weight."""
    config = config or GeneratorConfig()
    for _step, idx, batch_seed in subject_schedule(subjects, weights, master_seed):
        yield generate_batch(subjects[idx], config.batch_size, batch_seed, config)
