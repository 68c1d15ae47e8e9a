"""Training loop: Adam, plateau-triggered learning-rate decay, early stop.

The protocol is fixed by configuration: one epoch is one pass over the train
split; validation loss (in the configured loss family's own space) drives the
plateau rule.  A plateau of `plateau_patience_epochs` epochs without
improvement decays the learning rate once by `lr_decay_factor`; a second
plateau halts training before a second decay is applied, so a finished run
never records more than one decay.

Checkpoints keep the best-validation-loss weights and embed the full model,
training, and data configuration as a JSON-compatible dict.  Writes are
atomic (temp file + rename).  A JSON-lines log records one line per epoch.
"""

from __future__ import annotations

import copy
import json
import math
import os
import time
from dataclasses import dataclass, field

import torch

from .data import DriftData
from .losses import batch_loss
from .unet import ModelSpec, UNet

LOSS_KINDS = ("position", "drift", "threshold")


class TrainingError(RuntimeError):
    """Configuration or numeric failure that aborts a training run."""


@dataclass(frozen=True)
class TrainConfig:
    loss_kind: str = "position"
    lr: float = 1e-4
    adam_betas: tuple[float, float] = (0.9, 0.999)
    # losses sit at 1e-7 scale here, so gradients routinely fall below the
    # optimizer's stock epsilon of 1e-8, which silently shrinks every step;
    # a smaller epsilon keeps Adam scale-free at this magnitude
    adam_eps: float = 1e-12
    weight_decay: float = 0.0
    batch_size: int = 16
    plateau_patience_epochs: int = 3
    lr_decay_factor: float = 10.0
    stop_rule: bool = True
    max_epochs: int = 30
    seeds: tuple[int, ...] = (0, 1, 2, 3)

    def __post_init__(self):
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.loss_kind!r}; expected one of {LOSS_KINDS}")
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if self.adam_eps <= 0:
            raise ValueError(f"adam_eps must be positive, got {self.adam_eps}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.plateau_patience_epochs < 1:
            raise ValueError(f"plateau_patience_epochs must be >= 1, got {self.plateau_patience_epochs}")
        if self.lr_decay_factor <= 1.0:
            raise ValueError(f"lr_decay_factor must be > 1, got {self.lr_decay_factor}")
        if self.max_epochs < 1:
            raise ValueError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if not self.seeds:
            raise ValueError("seeds must not be empty")


@dataclass(frozen=True)
class TrainResult:
    seed: int
    epochs_run: int
    decays_applied: int
    best_val: float | None
    best_epoch: int | None
    checkpoint_path: str
    log_path: str
    train_losses: tuple[float, ...] = field(repr=False)
    val_losses: tuple[float, ...] = field(repr=False)


def _config_payload(spec: ModelSpec, cfg: TrainConfig, data: DriftData, seed: int, scale: float) -> dict:
    return {
        "format": 1,
        "model": {
            "in_channels": spec.in_channels,
            "out_channels": spec.out_channels,
            "depth": spec.depth,
            "base_width": spec.base_width,
            "density_residual": cfg.loss_kind != "drift",
            "padding": "reflect-pad-crop",
        },
        "train": {
            "loss_kind": cfg.loss_kind,
            "lr": cfg.lr,
            "adam_betas": list(cfg.adam_betas),
            "adam_eps": cfg.adam_eps,
            "weight_decay": cfg.weight_decay,
            "batch_size": cfg.batch_size,
            "plateau_patience_epochs": cfg.plateau_patience_epochs,
            "lr_decay_factor": cfg.lr_decay_factor,
            "stop_rule": cfg.stop_rule,
            "max_epochs": cfg.max_epochs,
            "seed": seed,
        },
        "data": {
            "rows": data.rows,
            "cols": data.cols,
            "channel_schema": data.schema,
            "channels": list(data.manifest["channels"]),
            "sigma": float(data.manifest["sigma"]),
            "velocity_scale": scale,
        },
    }


def save_checkpoint(path, state_dict, config: dict) -> None:
    """Atomic checkpoint write: serialize to a temp file, then rename."""
    tmp = f"{path}.tmp"
    torch.save({"state_dict": state_dict, "config": config}, tmp)
    os.replace(tmp, path)


def load_checkpoint(path) -> tuple[UNet, dict]:
    """Rebuild the model recorded in a checkpoint (eval mode, no grad)."""
    payload = torch.load(path, map_location="cpu", weights_only=True)
    config = payload["config"]
    m = config["model"]
    spec = ModelSpec(
        in_channels=m["in_channels"],
        out_channels=m["out_channels"],
        depth=m["depth"],
        base_width=m["base_width"],
    )
    model = UNet(spec, density_residual=m["density_residual"])
    model.load_state_dict(payload["state_dict"])
    model.eval()
    for p in model.parameters():
        p.requires_grad_(False)
    return model, config


def _epoch_pass(model, inputs, targets, ocean, cfg, optimizer=None, generator=None) -> float:
    """One pass over a tensor set; returns the sample-weighted mean loss.

    With an optimizer this is a training pass over a seeded shuffle; without
    one it is an in-order evaluation pass under no_grad.
    """
    n = inputs.shape[0]
    training = optimizer is not None
    order = torch.randperm(n, generator=generator) if training else torch.arange(n)
    total = 0.0
    context = torch.enable_grad() if training else torch.no_grad()
    with context:
        for start in range(0, n, cfg.batch_size):
            chunk = order[start : start + cfg.batch_size]
            x = inputs[chunk]
            y = targets[chunk]
            out = model(x).squeeze(1)
            loss = batch_loss(cfg.loss_kind, out, x[:, -1], y, ocean)
            value = float(loss.detach())
            if not math.isfinite(value):
                raise TrainingError(f"non-finite {cfg.loss_kind} loss at samples {start}..{start + len(chunk)}")
            if training:
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
            total += value * len(chunk)
    return total / n


def train_one(
    data: DriftData,
    spec: ModelSpec,
    cfg: TrainConfig,
    seed: int,
    out_dir,
    velocity_scale: float | None = None,
    tensors=None,
) -> TrainResult:
    """Train a single model at one seed; returns paths plus the loss curves."""
    if spec.in_channels != data.n_channels:
        raise TrainingError(
            f"model expects {spec.in_channels} channels but the dataset provides "
            f"{data.n_channels} ({', '.join(data.manifest['channels'])})"
        )
    scale = data.velocity_scale("train") if velocity_scale is None else velocity_scale
    if tensors is None:
        train_x, train_y, _ = data.split_tensors("train", scale)
        val_x, val_y, _ = data.split_tensors("val", scale)
    else:
        train_x, train_y, val_x, val_y = tensors
    if train_x.shape[0] == 0:
        raise TrainingError("train split has no samples")
    if cfg.stop_rule and val_x.shape[0] == 0:
        raise TrainingError("plateau stop rule needs a non-empty val split")
    ocean = data.ocean_tensor()

    torch.manual_seed(seed)
    model = UNet(spec, density_residual=cfg.loss_kind != "drift")
    optimizer = torch.optim.Adam(
        model.parameters(), lr=cfg.lr, betas=cfg.adam_betas, eps=cfg.adam_eps,
        weight_decay=cfg.weight_decay,
    )
    shuffle = torch.Generator().manual_seed(seed)

    os.makedirs(out_dir, exist_ok=True)
    log_path = os.path.join(out_dir, f"train_log_s{seed}.jsonl")
    checkpoint_path = os.path.join(out_dir, f"model_s{seed}.pt")
    config = _config_payload(spec, cfg, data, seed, scale)

    best_val: float | None = None
    best_epoch: int | None = None
    best_state = copy.deepcopy(model.state_dict())
    stale = 0
    decays = 0
    lr = cfg.lr
    train_curve: list[float] = []
    val_curve: list[float] = []

    with open(log_path, "w", encoding="utf-8") as log:
        for epoch in range(1, cfg.max_epochs + 1):
            started = time.perf_counter()
            model.train()
            train_loss = _epoch_pass(model, train_x, train_y, ocean, cfg, optimizer, shuffle)
            model.eval()
            val_loss = None
            if val_x.shape[0] > 0:
                val_loss = _epoch_pass(model, val_x, val_y, ocean, cfg)
            train_curve.append(train_loss)
            if val_loss is not None:
                val_curve.append(val_loss)

            stopping = False
            if val_loss is not None and (best_val is None or val_loss < best_val):
                best_val = val_loss
                best_epoch = epoch
                best_state = copy.deepcopy(model.state_dict())
                stale = 0
            elif cfg.stop_rule and val_loss is not None:
                stale += 1
                if stale >= cfg.plateau_patience_epochs:
                    if decays >= 1:
                        stopping = True  # halt instead of applying a second decay
                    else:
                        decays += 1
                        lr = lr / cfg.lr_decay_factor
                        for group in optimizer.param_groups:
                            group["lr"] = lr
                        stale = 0

            log.write(
                json.dumps(
                    {
                        "epoch": epoch,
                        "train_loss": train_loss,
                        "val_loss": val_loss,
                        "lr": lr,
                        "decays": decays,
                        "best_val": best_val,
                        "seconds": round(time.perf_counter() - started, 3),
                    },
                    sort_keys=True,
                )
                + "\n"
            )
            log.flush()
            if stopping:
                break

    epochs_run = len(train_curve)
    config["run"] = {
        "epochs_run": epochs_run,
        "decays_applied": decays,
        "best_val": best_val,
        "best_epoch": best_epoch,
        "selection": "best_val" if best_val is not None else "final",
    }
    state = best_state if best_val is not None else model.state_dict()
    save_checkpoint(checkpoint_path, state, config)
    return TrainResult(
        seed=seed,
        epochs_run=epochs_run,
        decays_applied=decays,
        best_val=best_val,
        best_epoch=best_epoch,
        checkpoint_path=checkpoint_path,
        log_path=log_path,
        train_losses=tuple(train_curve),
        val_losses=tuple(val_curve),
    )


def train(dataset_root, spec: ModelSpec, cfg: TrainConfig, out_dir) -> list[TrainResult]:
    """Train one model per configured seed on a dataset directory."""
    data = dataset_root if isinstance(dataset_root, DriftData) else DriftData(dataset_root)
    if spec.in_channels != data.n_channels:
        raise TrainingError(
            f"model expects {spec.in_channels} channels but the dataset provides "
            f"{data.n_channels} ({', '.join(data.manifest['channels'])})"
        )
    scale = data.velocity_scale("train")
    train_x, train_y, _ = data.split_tensors("train", scale)
    val_x, val_y, _ = data.split_tensors("val", scale)
    tensors = (train_x, train_y, val_x, val_y)
    return [
        train_one(data, spec, cfg, seed, out_dir, velocity_scale=scale, tensors=tensors)
        for seed in cfg.seeds
    ]
