"""Command-line interface: generate samples, evaluate metrics, inspect output.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
Structured output goes to stdout as one JSON record per line; diagnostics
go to stderr.  All commands are deterministic given their flags; --seed
fully controls stochastic output regardless of worker count.
"""

from __future__ import annotations

import argparse
import json
import math
import multiprocessing as mp
import os
import sys
from pathlib import Path

import numpy as np

from .config import GeneratorConfig, load_config
from .dataset import (
    IMAGE_NAME,
    load_manifest,
    load_subject,
    read_sample_meta,
    write_sample,
)
from .errors import PathosynthError
from .metrics import metric_dice, metric_l1, metric_psnr, metric_ssim
from .nifti import read_nifti
from .pipeline import generate_planned, plan_batch, subject_schedule

WORKERS_ENV = "PATHOSYNTH_WORKERS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # exit 1 instead of argparse's 2
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="pathosynth", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate batches of synthetic samples")
    gen.add_argument("manifest", help="dataset manifest (JSON)")
    gen.add_argument("out_dir", help="output directory")
    gen.add_argument("--config", help="generator config file (JSON); flags override it")
    gen.add_argument("--seed", type=int, default=None, help="master seed")
    gen.add_argument("--num-batches", type=int, default=1)
    gen.add_argument("--batch-size", type=int, default=None)
    gen.add_argument(
        "--workers",
        type=int,
        default=None,
        help=f"worker processes (default: ${WORKERS_ENV} or 1)",
    )

    met = sub.add_parser("metrics", help="compare predictions against a reference volume")
    met.add_argument("pred", help="prediction volume, sample dir, or directory of samples")
    met.add_argument("ref", help="reference volume")
    met.add_argument(
        "--metric", choices=["l1", "psnr", "ssim", "dice", "all"], default="all"
    )
    met.add_argument("--threshold", type=float, default=0.5, help="dice binarization threshold")

    ins = sub.add_parser("inspect", help="render a slice and print sample metadata")
    ins.add_argument("sample_dir", help="one generated sample directory")
    ins.add_argument("--slice", dest="slice_spec", default=None, help="axis:index, e.g. z:64")
    ins.add_argument("--out", default=None, help="output PGM path (default: sample_dir/slice.pgm)")
    return parser


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------

# Worker state inherited through fork(); set before the pool starts.
_WORKER_STATE: dict = {}


def _run_sample_task(task) -> int:
    sample_index, subject_index, planned = task
    config: GeneratorConfig = _WORKER_STATE["config"]
    subject = _WORKER_STATE["subjects"][subject_index]
    sample = generate_planned(subject, planned, config)
    write_sample(sample, _WORKER_STATE["out_dir"], sample_index, config)
    return sample_index


def cmd_generate(args) -> int:
    config = load_config(args.config) if args.config else GeneratorConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.batch_size is not None:
        overrides["batch_size"] = args.batch_size
    if args.workers is not None:
        overrides["workers"] = args.workers
    elif os.environ.get(WORKERS_ENV):
        overrides["workers"] = int(os.environ[WORKERS_ENV])
    if overrides:
        config = GeneratorConfig.from_dict({**config.to_dict(), **overrides})
    if args.num_batches < 1:
        raise UsageError("--num-batches must be >= 1")

    descriptors, manifest_weights = load_manifest(args.manifest)
    weights = dict(manifest_weights)
    weights.update(config.dataset_weights)
    subjects = [load_subject(d, config) for d in descriptors]

    # Plan everything up front: sample tasks are independent, so workers can
    # run across samples within and across batches while the on-disk result
    # stays identical to a sequential run.
    schedule = subject_schedule(subjects, weights, config.seed)
    n = config.batch_size
    tasks = []
    batch_info = []
    for _ in range(args.num_batches):
        step, idx, batch_seed = next(schedule)
        plan = plan_batch(n, batch_seed, config)
        batch_info.append(
            {
                "batch": step,
                "subject": subjects[idx].id,
                "samples": n,
                "severities": [round(p.severity, 6) for p in plan],
            }
        )
        for j, planned in enumerate(plan):
            tasks.append((step * n + j, idx, planned))

    _WORKER_STATE["config"] = config
    _WORKER_STATE["subjects"] = subjects
    _WORKER_STATE["out_dir"] = Path(args.out_dir)

    def emit_completed(done_indices):
        # print a batch summary as soon as its last sample lands
        pending = iter(batch_info)
        current = next(pending, None)
        remaining = n
        for _ in done_indices:
            remaining -= 1
            if remaining == 0 and current is not None:
                print(json.dumps(current, sort_keys=True))
                current = next(pending, None)
                remaining = n

    if config.workers <= 1 or len(tasks) <= 1:
        emit_completed(_run_sample_task(t) for t in tasks)
    else:
        ctx = mp.get_context("fork")
        with ctx.Pool(processes=config.workers) as pool:
            emit_completed(pool.imap(_run_sample_task, tasks))
    return 0


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def _metric_record(pred_path: Path, ref, which: str, threshold: float) -> dict:
    pred = read_nifti(pred_path, kind="image")
    record: dict = {"pred": str(pred_path)}
    wanted = ["l1", "psnr", "ssim", "dice"] if which == "all" else [which]
    for name in wanted:
        if name == "l1":
            record["l1"] = metric_l1(pred, ref)
        elif name == "psnr":
            value = metric_psnr(pred, ref)
            if math.isinf(value):
                record["psnr"] = None
                record["psnr_infinite"] = True
            else:
                record["psnr"] = value
        elif name == "ssim":
            record["ssim"] = metric_ssim(pred, ref)
        elif name == "dice":
            record["dice"] = metric_dice(pred, ref, threshold)
    return record


def _collect_pred_files(pred: Path) -> list[Path]:
    if pred.is_file():
        return [pred]
    if (pred / IMAGE_NAME).exists():
        return [pred / IMAGE_NAME]
    found = sorted(pred.rglob(IMAGE_NAME))
    if not found:
        raise UsageError(f"no volumes found under {pred}")
    return found


def cmd_metrics(args) -> int:
    ref = read_nifti(args.ref, kind="image")
    for pred_path in _collect_pred_files(Path(args.pred)):
        record = _metric_record(pred_path, ref, args.metric, args.threshold)
        record["ref"] = str(args.ref)
        print(json.dumps(record, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# inspect
# ---------------------------------------------------------------------------


def _write_pgm(image2d: np.ndarray, path: Path) -> None:
    scaled = np.clip(np.round(image2d * 255.0), 0, 255).astype(np.uint8)
    header = f"P5\n{scaled.shape[1]} {scaled.shape[0]}\n255\n".encode("ascii")
    path.write_bytes(header + scaled.tobytes())


def cmd_inspect(args) -> int:
    sample_dir = Path(args.sample_dir)
    meta = read_sample_meta(sample_dir)
    image = read_nifti(sample_dir / IMAGE_NAME, kind="image")

    spec = args.slice_spec or f"z:{image.dims[2] // 2}"
    try:
        axis_name, index_str = spec.split(":")
        axis = {"x": 0, "y": 1, "z": 2}[axis_name.lower()]
        index = int(index_str)
    except (ValueError, KeyError) as exc:
        raise UsageError(f"bad --slice {spec!r}; expected axis:index") from exc
    if not 0 <= index < image.dims[axis]:
        raise UsageError(f"slice index {index} outside axis of size {image.dims[axis]}")

    slicer = [slice(None)] * 3
    slicer[axis] = index
    out_path = Path(args.out) if args.out else sample_dir / "slice.pgm"
    _write_pgm(image.data[tuple(slicer)], out_path)

    summary = {
        "subject_id": meta["subject_id"],
        "sample_index": meta["sample_index"],
        "severity": meta["severity"],
        "alpha": meta["alpha"],
        "beta": meta["beta"],
        "seeds": meta["seeds"],
        "pathology_shift": meta["pathology_shift"],
        "dims": meta["dims"],
        "slice": spec,
        "rendered": str(out_path),
    }
    print(json.dumps(summary, sort_keys=True))
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "generate":
            return cmd_generate(args)
        if args.command == "metrics":
            return cmd_metrics(args)
        if args.command == "inspect":
            return cmd_inspect(args)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (PathosynthError, FileNotFoundError, json.JSONDecodeError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report and exit 3, never traceback
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
