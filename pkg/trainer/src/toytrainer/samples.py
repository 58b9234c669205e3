"""Loading generated sample directories into training batches."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .nifti_io import read_volume


@dataclass
class SampleRecord:
    image: np.ndarray
    target_anat: np.ndarray | None
    target_pathol: np.ndarray | None
    subject_id: str
    sample_index: int
    severity: float
    alpha: int
    beta: int


@dataclass
class TrainBatch:
    """Stacked tensors of one subject's consecutive samples."""

    images: torch.Tensor  # (N, 1, D, H, W) float32
    target_anat: torch.Tensor | None  # (N, D, H, W)
    target_pathol: torch.Tensor | None
    alpha: int
    beta: int
    subject_id: str


def discover_samples(root: str | Path) -> list[SampleRecord]:
    root = Path(root)
    records = []
    for meta_path in sorted(root.rglob("meta.json")):
        sample_dir = meta_path.parent
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        image, _ = read_volume(sample_dir / "image.nii.gz")
        anat_path = sample_dir / "target_anat.nii.gz"
        pathol_path = sample_dir / "target_pathol.nii.gz"
        records.append(
            SampleRecord(
                image=np.asarray(image, np.float32),
                target_anat=np.asarray(read_volume(anat_path)[0], np.float32)
                if anat_path.exists()
                else None,
                target_pathol=np.asarray(read_volume(pathol_path)[0], np.float32)
                if pathol_path.exists()
                else None,
                subject_id=str(meta["subject_id"]),
                sample_index=int(meta["sample_index"]),
                severity=float(meta["severity"]),
                alpha=int(meta["alpha"]),
                beta=int(meta["beta"]),
            )
        )
    if not records:
        raise FileNotFoundError(f"no generated samples under {root}")
    return records


def build_batches(records: list[SampleRecord], batch_size: int) -> list[TrainBatch]:
    """Group consecutive same-subject samples into fixed-size batches."""
    by_subject: dict[str, list[SampleRecord]] = {}
    for rec in sorted(records, key=lambda r: (r.subject_id, r.sample_index)):
        by_subject.setdefault(rec.subject_id, []).append(rec)

    batches = []
    for subject_id, recs in by_subject.items():
        for start in range(0, len(recs) - batch_size + 1, batch_size):
            chunk = recs[start : start + batch_size]
            alpha, beta = chunk[0].alpha, chunk[0].beta
            images = torch.from_numpy(np.stack([r.image for r in chunk])[:, None])
            anat = (
                torch.from_numpy(np.stack([r.target_anat for r in chunk])) if alpha else None
            )
            pathol = (
                torch.from_numpy(np.stack([r.target_pathol for r in chunk])) if beta else None
            )
            batches.append(TrainBatch(images, anat, pathol, alpha, beta, subject_id))
    if not batches:
        raise ValueError(f"not enough samples for batch size {batch_size}")
    return batches
