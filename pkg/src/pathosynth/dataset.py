"""Dataset manifests and the on-disk sample layout.

A manifest is a JSON document listing subjects with paths to their label
map, anomaly source, and optional ground-truth images::

    {
      "schema_version": 1,
      "label_classes": {"0": "background", "1": "white-matter", ...},
      "datasets": {"siteA": {"weight": 1.0}},
      "subjects": [
        {"id": "s001", "dataset_tag": "siteA",
         "labels": "s001/labels.nii.gz",
         "pathology": "s001/anomaly.nii.gz", "pathology_kind": "prob",
         "gt_anat": "s001/t1w.nii.gz", "gt_anat_modality": "t1w",
         "gt_pathol": null, "gt_pathol_modality": "t2w_flair"}
      ]
    }

Paths are relative to the manifest file.  Availability flags follow from
the presence of the ground-truth paths.  When pathology_kind is "mask" and
a ground-truth image exists, the soft anomaly map is built from that image
inside the mask; otherwise the file is read as probabilities directly.

Generated samples land in ``out_dir/<subject>/sample_<idx>/`` with the
image, the per-sample deformed targets, and a metadata record sufficient to
regenerate the sample bit-identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from dataclasses import asdict

from .config import GeneratorConfig
from .corrupt import realized_params
from .errors import ManifestError
from .grid import LabelVolume, ProbVolume, TissueClass, Volume, resample
from .nifti import as_label_volume, read_nifti, write_nifti
from .pathology import ModalityClass, PathologyDraw, ShiftDirection, anomaly_probability
from .pipeline import Batch, GenSample, LabeledSubject, SampleSeeds, generate_from_seeds

MANIFEST_SCHEMA_VERSION = 1
META_SCHEMA_VERSION = 1
META_NAME = "meta.json"
IMAGE_NAME = "image.nii.gz"
PATHOLOGY_NAME = "pathology.nii.gz"
TARGET_ANAT_NAME = "target_anat.nii.gz"
TARGET_PATHOL_NAME = "target_pathol.nii.gz"


@dataclass
class SubjectDescriptor:
    """Resolved manifest entry; volumes are loaded on demand."""

    id: str
    dataset_tag: str
    labels_path: Path
    pathology_path: Path
    pathology_kind: str
    gt_anat_path: Path | None
    gt_pathol_path: Path | None
    gt_anat_modality: ModalityClass
    gt_pathol_modality: ModalityClass
    label_classes: dict[int, TissueClass]

    @property
    def alpha(self) -> int:
        return 1 if self.gt_anat_path is not None else 0

    @property
    def beta(self) -> int:
        return 1 if self.gt_pathol_path is not None else 0


def _parse_label_classes(raw: dict) -> dict[int, TissueClass]:
    try:
        return {int(k): TissueClass(v) for k, v in raw.items()}
    except ValueError as exc:
        raise ManifestError(f"bad label_classes entry: {exc}") from exc


def load_manifest(path: str | Path) -> tuple[list[SubjectDescriptor], dict[str, float]]:
    """Parse and validate a manifest; returns descriptors and dataset weights."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    if "schema_version" not in doc:
        raise ManifestError(f"{path}: manifest missing schema_version")
    if int(doc["schema_version"]) != MANIFEST_SCHEMA_VERSION:
        raise ManifestError(f"{path}: unsupported manifest schema {doc['schema_version']}")

    label_classes = _parse_label_classes(doc.get("label_classes", {}))
    weights = {
        tag: float(entry.get("weight", 1.0)) for tag, entry in doc.get("datasets", {}).items()
    }

    root = path.parent
    descriptors = []
    for entry in doc.get("subjects", []):
        sid = entry.get("id")
        if not sid:
            raise ManifestError(f"{path}: subject entry without id")

        def _resolve(field_name: str, required: bool) -> Path | None:
            rel = entry.get(field_name)
            if rel is None:
                if required:
                    raise ManifestError(f"subject '{sid}' field '{field_name}': missing")
                return None
            p = root / rel
            if not p.exists():
                raise ManifestError(f"subject '{sid}' field '{field_name}': file not found: {p}")
            return p

        gt_anat = _resolve("gt_anat", required=False)
        gt_pathol = _resolve("gt_pathol", required=False)
        if gt_anat is None and gt_pathol is None:
            raise ManifestError(f"subject '{sid}': needs at least one ground-truth image")
        descriptors.append(
            SubjectDescriptor(
                id=str(sid),
                dataset_tag=str(entry.get("dataset_tag", "default")),
                labels_path=_resolve("labels", required=True),
                pathology_path=_resolve("pathology", required=True),
                pathology_kind=str(entry.get("pathology_kind", "prob")),
                gt_anat_path=gt_anat,
                gt_pathol_path=gt_pathol,
                gt_anat_modality=ModalityClass(entry.get("gt_anat_modality", "t1w")),
                gt_pathol_modality=ModalityClass(entry.get("gt_pathol_modality", "t2w_flair")),
                label_classes=dict(label_classes),
            )
        )
    if not descriptors:
        raise ManifestError(f"{path}: manifest lists no subjects")
    return descriptors, weights


def load_subject(desc: SubjectDescriptor, config: GeneratorConfig | None = None) -> LabeledSubject:
    """Read a subject's volumes; optionally resample onto config.sample_size."""
    labels = read_nifti(desc.labels_path, kind="labels")
    if desc.label_classes:
        table = dict(desc.label_classes)
        for lab in np.unique(labels.data):
            if int(lab) not in table:
                raise ManifestError(
                    f"subject '{desc.id}': label {int(lab)} has no class in label_classes"
                )
        labels = as_label_volume(labels, table)

    gt_anat = read_nifti(desc.gt_anat_path, kind="image") if desc.gt_anat_path else None
    gt_pathol = read_nifti(desc.gt_pathol_path, kind="image") if desc.gt_pathol_path else None

    if desc.pathology_kind == "mask":
        mask_vol = read_nifti(desc.pathology_path, kind="prob")
        source = gt_pathol if gt_pathol is not None else gt_anat
        modality = desc.gt_pathol_modality if gt_pathol is not None else desc.gt_anat_modality
        if mask_vol.data.max() > 0:
            pathology = anomaly_probability(source, mask_vol, modality)
        else:
            pathology = mask_vol
    elif desc.pathology_kind == "prob":
        pathology = read_nifti(desc.pathology_path, kind="prob")
    else:
        raise ManifestError(f"subject '{desc.id}': unknown pathology_kind {desc.pathology_kind!r}")

    if config is not None and config.enforce_sample_size:
        size = config.sample_size
        if labels.dims != tuple(size):
            scale = [n * s / t for n, s, t in zip(labels.dims, labels.spacing, size)]
            spacing = tuple(scale)
            labels = resample(labels, size, spacing, mode="nearest")
            pathology = resample(pathology, size, spacing)
            gt_anat = resample(gt_anat, size, spacing) if gt_anat is not None else None
            gt_pathol = resample(gt_pathol, size, spacing) if gt_pathol is not None else None

    return LabeledSubject(
        id=desc.id,
        labels=labels,
        pathology=pathology,
        gt_anat=gt_anat,
        gt_pathol=gt_pathol,
        dataset_tag=desc.dataset_tag,
    )


# ---------------------------------------------------------------------------
# Sample output layout
# ---------------------------------------------------------------------------


def _shift_to_meta(shift: PathologyDraw | list[PathologyDraw]):
    def one(d: PathologyDraw) -> dict:
        return {
            "delta": d.delta,
            "direction": d.direction.value,
            "white_mean": d.white_mean,
            "gray_mean": d.gray_mean,
        }

    return [one(d) for d in shift] if isinstance(shift, list) else one(shift)


def _shift_from_meta(raw) -> PathologyDraw | list[PathologyDraw]:
    def one(d: dict) -> PathologyDraw:
        return PathologyDraw(
            d["delta"], ShiftDirection(d["direction"]), d["white_mean"], d["gray_mean"]
        )

    return [one(d) for d in raw] if isinstance(raw, list) else one(raw)


def sample_meta(sample: GenSample, sample_index: int, config: GeneratorConfig) -> dict:
    config_record = config.to_dict()
    # execution detail, not generation semantics; bytes on disk must not
    # depend on the worker count
    config_record.pop("workers", None)
    corruption_spec = config.corruption.spec(sample.severity, sample.seeds.corruption)
    return {
        "schema_version": META_SCHEMA_VERSION,
        "subject_id": sample.subject_id,
        "sample_index": sample_index,
        "master_seed": sample.master_seed,
        "severity": sample.severity,
        "seeds": {
            "deform": sample.seeds.deform,
            "contrast": sample.seeds.contrast,
            "pathology": sample.seeds.pathology,
            "corruption": sample.seeds.corruption,
        },
        "alpha": sample.alpha,
        "beta": sample.beta,
        "pathology_shift": _shift_to_meta(sample.pathology_shift),
        "corruption_realized": asdict(realized_params(corruption_spec, sample.image.spacing)),
        "dims": list(sample.image.dims),
        "spacing": list(sample.image.spacing),
        "config": config_record,
    }


def write_sample(
    sample: GenSample, out_dir: str | Path, sample_index: int, config: GeneratorConfig
) -> Path:
    """Write one sample under out_dir/<subject>/sample_<idx>/; returns the dir."""
    sample_dir = Path(out_dir) / sample.subject_id / f"sample_{sample_index:06d}"
    sample_dir.mkdir(parents=True, exist_ok=True)
    write_nifti(sample.image, sample_dir / IMAGE_NAME, "float32")
    write_nifti(sample.deformed_targets.pathology, sample_dir / PATHOLOGY_NAME, "float32")
    if sample.deformed_targets.anat is not None:
        write_nifti(sample.deformed_targets.anat, sample_dir / TARGET_ANAT_NAME, "float32")
    if sample.deformed_targets.pathol is not None:
        write_nifti(sample.deformed_targets.pathol, sample_dir / TARGET_PATHOL_NAME, "float32")
    meta = sample_meta(sample, sample_index, config)
    (sample_dir / META_NAME).write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return sample_dir


def write_batch(
    batch: Batch, out_dir: str | Path, start_index: int, config: GeneratorConfig
) -> list[Path]:
    return [
        write_sample(sample, out_dir, start_index + i, config)
        for i, sample in enumerate(batch.samples)
    ]


def read_sample_meta(sample_dir: str | Path) -> dict:
    meta_path = Path(sample_dir) / META_NAME
    if not meta_path.exists():
        raise ManifestError(f"no {META_NAME} in {sample_dir}")
    return json.loads(meta_path.read_text(encoding="utf-8"))


def read_sample_volumes(sample_dir: str | Path) -> dict[str, Volume | ProbVolume]:
    """Load whatever volumes a sample directory contains."""
    sample_dir = Path(sample_dir)
    out: dict[str, Volume | ProbVolume] = {
        "image": read_nifti(sample_dir / IMAGE_NAME, kind="image"),
        "pathology": read_nifti(sample_dir / PATHOLOGY_NAME, kind="prob"),
    }
    if (sample_dir / TARGET_ANAT_NAME).exists():
        out["target_anat"] = read_nifti(sample_dir / TARGET_ANAT_NAME, kind="image")
    if (sample_dir / TARGET_PATHOL_NAME).exists():
        out["target_pathol"] = read_nifti(sample_dir / TARGET_PATHOL_NAME, kind="image")
    return out


def regenerate_sample(subject: LabeledSubject, meta: dict) -> GenSample:
    """Rebuild a sample bit-identically from its metadata record."""
    seeds = SampleSeeds(**meta["seeds"])
    config = GeneratorConfig.from_dict(meta["config"])
    sample = generate_from_seeds(subject, meta["severity"], seeds, config)
    sample.master_seed = meta["master_seed"]
    return sample
