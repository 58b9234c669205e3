"""Shared fixtures: deterministic synthetic subjects at test scale."""

from __future__ import annotations

import numpy as np
import pytest

from pathosynth import LabeledSubject, LabelVolume, ProbVolume, TissueClass, Volume

DEFAULT_TABLE = {
    0: TissueClass.BACKGROUND,
    1: TissueClass.WHITE_MATTER,
    2: TissueClass.GRAY_MATTER,
    3: TissueClass.CSF,
}


def sphere(dims, center, radius) -> np.ndarray:
    idx = np.indices(dims).astype(np.float64)
    c = np.asarray(center, dtype=np.float64)
    return np.sqrt(((idx - c[:, None, None, None]) ** 2).sum(axis=0)) < radius


def make_labels(dims=(24, 24, 24)) -> LabelVolume:
    """Concentric anatomy: gray shell, white core, CSF center, background 0."""
    n = dims[0]
    c = (np.asarray(dims) - 1) / 2
    labels = np.zeros(dims, np.int32)
    labels[sphere(dims, c, 0.45 * n)] = 2
    labels[sphere(dims, c, 0.33 * n)] = 1
    labels[sphere(dims, c, 0.12 * n)] = 3
    return LabelVolume(labels, dict(DEFAULT_TABLE))


def make_lesion(dims=(24, 24, 24)) -> ProbVolume:
    """One soft lesion blob inside the white-matter core."""
    n = dims[0]
    c = (np.asarray(dims) - 1) / 2 + np.array([0.15 * n, 0.08 * n, -0.05 * n])
    idx = np.indices(dims).astype(np.float64)
    dist = np.sqrt(((idx - c[:, None, None, None]) ** 2).sum(axis=0))
    prob = np.clip(1.0 - dist / (0.1 * n + 1.5), 0.0, 1.0)
    return ProbVolume(prob.astype(np.float32))


def build_subject(
    dims=(24, 24, 24),
    with_anat: bool = True,
    with_pathol: bool = True,
    subject_id: str = "subj0",
    dataset_tag: str = "demo",
    seed: int = 0,
) -> LabeledSubject:
    rng = np.random.default_rng(seed)
    labels = make_labels(dims)
    lesion = make_lesion(dims)
    base = np.select(
        [labels.data == 1, labels.data == 2, labels.data == 3],
        [0.75, 0.45, 0.15],
        default=0.0,
    )
    anat = None
    if with_anat:
        noisy = np.clip(base + 0.02 * rng.standard_normal(dims), 0.0, 1.0)
        noisy[labels.data == 0] = 0.0
        anat = Volume(noisy.astype(np.float32))
    pathol = None
    if with_pathol:
        inverted = np.where(labels.data > 0, 0.9 - base, 0.0) + 0.5 * lesion.data
        pathol = Volume(np.clip(inverted, 0.0, 1.0).astype(np.float32))
    return LabeledSubject(
        id=subject_id,
        labels=labels,
        pathology=lesion,
        gt_anat=anat,
        gt_pathol=pathol,
        dataset_tag=dataset_tag,
    )


@pytest.fixture
def subject() -> LabeledSubject:
    return build_subject()


@pytest.fixture
def small_subject() -> LabeledSubject:
    return build_subject(dims=(16, 16, 16))
