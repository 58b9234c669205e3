"""Toy training and evaluation loops over generated sample directories.

``train_toy`` consumes the generator's on-disk layout, optimizes the
encoder-decoder with the dual synthesis + implicit-pathology objective, and
writes a JSONL loss curve plus a final checkpoint.  Everything runs on CPU
at 32^3 scale in well under the 5-minute budget.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from .kernels import (
    Schedules,
    implicit_pathology_loss,
    l1,
    psnr,
    ssim,
    synthesis_loss,
    total_loss,
)
from .model import ToyEncoderDecoder
from .samples import TrainBatch, build_batches, discover_samples


@dataclass(frozen=True)
class ToyTrainConfig:
    volume_size: int = 32  # informational; batches come sized from disk
    base_channels: int = 8
    batch_size: int = 4
    steps: int = 50
    seed: int = 0
    schedules: Schedules = field(default_factory=Schedules)
    weight_decay: float = 1e-2


@dataclass
class StepRecord:
    step: int
    l_synth: float
    l_pathol: float
    omega: float
    lr: float
    total: float


def _losses_for_batch(
    model: ToyEncoderDecoder, batch: TrainBatch, schedules: Schedules, step: int
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    pred_anat, pred_pathol = model(batch.images)
    l_synth = synthesis_loss(
        pred_anat,
        pred_pathol,
        batch.target_anat,
        batch.target_pathol,
        batch.alpha,
        batch.beta,
        schedules.lam,
    )
    l_pathol = implicit_pathology_loss(
        pred_anat, pred_pathol, batch.target_anat, batch.target_pathol, batch.alpha, batch.beta
    )
    return l_synth, l_pathol, total_loss(l_synth, l_pathol, schedules.omega_at(step))


def train_toy(
    generated_dir: str | Path,
    config: ToyTrainConfig = ToyTrainConfig(),
    out_dir: str | Path | None = None,
) -> list[StepRecord]:
    """Run the toy loop; returns the per-step loss history."""
    torch.manual_seed(config.seed)
    torch.use_deterministic_algorithms(True)

    records = discover_samples(generated_dir)
    batches = build_batches(records, config.batch_size)
    model = ToyEncoderDecoder(config.base_channels)
    schedules = config.schedules
    optimizer = torch.optim.AdamW(
        model.parameters(), lr=schedules.lr_initial, weight_decay=config.weight_decay
    )

    history: list[StepRecord] = []
    for step in range(config.steps):
        lr = schedules.lr_at(step, config.steps)
        for group in optimizer.param_groups:
            group["lr"] = lr
        batch = batches[step % len(batches)]
        optimizer.zero_grad()
        l_synth, l_pathol, loss = _losses_for_batch(model, batch, schedules, step)
        loss.backward()
        optimizer.step()
        history.append(
            StepRecord(
                step=step,
                l_synth=float(l_synth.detach()),
                l_pathol=float(l_pathol.detach()),
                omega=schedules.omega_at(step),
                lr=lr,
                total=float(loss.detach()),
            )
        )

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "loss_log.jsonl", "w", encoding="utf-8") as fh:
            for rec in history:
                fh.write(json.dumps(asdict(rec), sort_keys=True) + "\n")
        torch.save(
            {"model": model.state_dict(), "config": asdict(config)},
            out_dir / "checkpoint.pt",
        )
    return history


def loss_trend_decreasing(history: list[StepRecord], window: int = 10) -> bool:
    """Median of the last `window` totals below the median of the first."""
    first = np.median([r.total for r in history[:window]])
    last = np.median([r.total for r in history[-window:]])
    return bool(last < first)


def eval_toy(checkpoint: str | Path, test_dir: str | Path) -> dict:
    """Per-modality L1 / PSNR / SSIM of the checkpointed model on a sample dir."""
    state = torch.load(checkpoint, weights_only=True)
    config_raw = dict(state["config"])
    config_raw["schedules"] = Schedules(**config_raw["schedules"])
    config = ToyTrainConfig(**config_raw)
    model = ToyEncoderDecoder(config.base_channels)
    model.load_state_dict(state["model"])
    model.eval()

    records = discover_samples(test_dir)
    batches = build_batches(records, 1)
    scores: dict[str, list[float]] = {}
    with torch.no_grad():
        for batch in batches:
            pred_anat, pred_pathol = model(batch.images)
            pairs = []
            if batch.alpha:
                pairs.append(("anat", pred_anat[0].numpy(), batch.target_anat[0].numpy()))
            if batch.beta:
                pairs.append(("pathol", pred_pathol[0].numpy(), batch.target_pathol[0].numpy()))
            for name, pred, target in pairs:
                pred = np.clip(pred, 0.0, 1.0)
                scores.setdefault(f"l1_{name}", []).append(l1(pred, target))
                scores.setdefault(f"psnr_{name}", []).append(psnr(pred, target))
                scores.setdefault(f"ssim_{name}", []).append(ssim(pred, target))
    return {k: float(np.mean(v)) for k, v in scores.items()}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="toytrainer", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("train", help="train the toy model on generated samples")
    tr.add_argument("generated_dir")
    tr.add_argument("out_dir")
    tr.add_argument("--steps", type=int, default=50)
    tr.add_argument("--batch-size", type=int, default=4)
    tr.add_argument("--seed", type=int, default=0)

    ev = sub.add_parser("eval", help="evaluate a checkpoint on generated samples")
    ev.add_argument("checkpoint")
    ev.add_argument("test_dir")

    args = parser.parse_args(argv)
    if args.command == "train":
        config = ToyTrainConfig(steps=args.steps, batch_size=args.batch_size, seed=args.seed)
        history = train_toy(args.generated_dir, config, args.out_dir)
        print(
            json.dumps(
                {
                    "steps": len(history),
                    "first_total": history[0].total,
                    "last_total": history[-1].total,
                    "decreasing": loss_trend_decreasing(history),
                },
                sort_keys=True,
            )
        )
        return 0
    if args.command == "eval":
        print(json.dumps(eval_toy(args.checkpoint, args.test_dir), sort_keys=True))
        return 0
    return 1


if __name__ == "__main__":
    sys.exit(main())
