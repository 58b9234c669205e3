"""Builds a small generated dataset by driving the generator CLI.

The trainer only ever sees the generator through its files: the fixtures
write source NIfTIs + a manifest, then invoke ``pathosynth generate`` in a
subprocess and hand the output directory to the tests.
"""

from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from toytrainer.nifti_io import write_volume

DIMS = (32, 32, 32)


def build_source_subject(root: Path, subject_id: str = "s0") -> dict:
    n = DIMS[0]
    idx = np.indices(DIMS).astype(np.float64)
    center = (np.asarray(DIMS) - 1) / 2
    radius = np.sqrt(((idx - center[:, None, None, None]) ** 2).sum(axis=0))

    labels = np.zeros(DIMS, np.int32)
    labels[radius < 0.45 * n] = 2
    labels[radius < 0.33 * n] = 1
    labels[radius < 0.12 * n] = 3

    lesion_center = center + np.array([0.15 * n, 0.08 * n, -0.05 * n])
    lesion_dist = np.sqrt(((idx - lesion_center[:, None, None, None]) ** 2).sum(axis=0))
    lesion = np.clip(1.0 - lesion_dist / (0.1 * n + 1.5), 0.0, 1.0).astype(np.float32)

    base = np.select([labels == 1, labels == 2, labels == 3], [0.75, 0.45, 0.15], 0.0)
    rng = np.random.default_rng(0)
    anat = np.clip(base + 0.02 * rng.standard_normal(DIMS), 0, 1).astype(np.float32)
    anat[labels == 0] = 0.0
    flair = np.where(labels > 0, 0.9 - base, 0.0) + 0.5 * lesion
    flair = np.clip(flair, 0, 1).astype(np.float32)

    subject_dir = root / subject_id
    write_volume(labels, subject_dir / "labels.nii.gz")
    write_volume(lesion, subject_dir / "anomaly.nii.gz")
    write_volume(anat, subject_dir / "t1w.nii.gz")
    write_volume(flair, subject_dir / "flair.nii.gz")
    return {
        "id": subject_id,
        "dataset_tag": "toy",
        "labels": f"{subject_id}/labels.nii.gz",
        "pathology": f"{subject_id}/anomaly.nii.gz",
        "gt_anat": f"{subject_id}/t1w.nii.gz",
        "gt_anat_modality": "t1w",
        "gt_pathol": f"{subject_id}/flair.nii.gz",
        "gt_pathol_modality": "t2w_flair",
    }


@pytest.fixture(scope="session")
def generated_dataset(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("toydata")
    entry = build_source_subject(root)
    manifest = root / "manifest.json"
    manifest.write_text(
        json.dumps(
            {
                "schema_version": 1,
                "label_classes": {
                    "0": "background",
                    "1": "white-matter",
                    "2": "gray-matter",
                    "3": "csf",
                },
                "datasets": {"toy": {"weight": 1.0}},
                "subjects": [entry],
            }
        )
    )
    out = root / "generated"
    result = subprocess.run(
        [
            sys.executable,
            "-m",
            "pathosynth.cli",
            "generate",
            str(manifest),
            str(out),
            "--seed",
            "11",
            "--num-batches",
            "2",
            "--batch-size",
            "4",
        ],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0, result.stderr
    return out
