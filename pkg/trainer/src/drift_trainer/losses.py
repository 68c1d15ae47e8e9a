"""Masked regression losses over ocean cells, on torch tensors.

Semantics mirror the simulator's metrics module: per-sample mean over the
ocean set (or the dynamic foreground set for the thresholded variant), then a
plain mean over the batch.  A sample with an empty foreground contributes
exactly 0.0.  All functions accept (H, W) or (B, H, W) prediction/target
tensors and an (H, W) boolean ocean mask.
"""

from __future__ import annotations

import torch


def _as_batch(t: torch.Tensor, name: str) -> torch.Tensor:
    if t.dim() == 2:
        return t.unsqueeze(0)
    if t.dim() == 3:
        return t
    raise ValueError(f"{name} must be (H, W) or (B, H, W), got {tuple(t.shape)}")


def _check(d_hat: torch.Tensor, d_next: torch.Tensor, ocean: torch.Tensor):
    d_hat = _as_batch(d_hat, "d_hat")
    d_next = _as_batch(d_next, "d_next")
    if d_hat.shape != d_next.shape:
        raise ValueError(f"shape mismatch: {tuple(d_hat.shape)} vs {tuple(d_next.shape)}")
    if ocean.shape != d_hat.shape[1:]:
        raise ValueError(f"mask shape {tuple(ocean.shape)} != map shape {tuple(d_hat.shape[1:])}")
    if ocean.dtype != torch.bool:
        ocean = ocean.bool()
    if not bool(ocean.any()):
        raise ValueError("ocean mask selects no pixels")
    return d_hat, d_next, ocean


def position_loss(d_hat: torch.Tensor, d_next: torch.Tensor, ocean: torch.Tensor) -> torch.Tensor:
    """Mean squared error over ocean pixels, averaged over the batch."""
    d_hat, d_next, ocean = _check(d_hat, d_next, ocean)
    diff2 = (d_hat - d_next) ** 2
    return diff2[:, ocean].mean(dim=1).mean()


def drift_loss(
    r_hat: torch.Tensor, d_t: torch.Tensor, d_next: torch.Tensor, ocean: torch.Tensor
) -> torch.Tensor:
    """Squared error of the recovered map d_t + r_hat against d_next.

    Algebraically identical to position_loss(d_t + r_hat, d_next): the model
    regresses the day-to-day change instead of the next map.
    """
    r_hat = _as_batch(r_hat, "r_hat")
    d_t = _as_batch(d_t, "d_t")
    if r_hat.shape != d_t.shape:
        raise ValueError(f"shape mismatch: {tuple(r_hat.shape)} vs {tuple(d_t.shape)}")
    return position_loss(d_t + r_hat, d_next, ocean)


def threshold_loss(d_hat: torch.Tensor, d_next: torch.Tensor, ocean: torch.Tensor) -> torch.Tensor:
    """MSE restricted to ocean pixels where target or prediction is > 0.

    The foreground set is recomputed from the current prediction (strict > 0,
    membership not differentiated).  Samples with an empty foreground
    contribute 0.0.
    """
    d_hat, d_next, ocean = _check(d_hat, d_next, ocean)
    foreground = ocean.unsqueeze(0) & ((d_next > 0) | (d_hat.detach() > 0))
    diff2 = (d_hat - d_next) ** 2
    sums = torch.where(foreground, diff2, torch.zeros_like(diff2)).sum(dim=(1, 2))
    counts = foreground.sum(dim=(1, 2))
    per_sample = torch.where(
        counts > 0, sums / counts.clamp(min=1).to(diff2.dtype), torch.zeros_like(sums)
    )
    return per_sample.mean()


def batch_loss(
    kind: str,
    output: torch.Tensor,
    d_t: torch.Tensor,
    d_next: torch.Tensor,
    ocean: torch.Tensor,
) -> torch.Tensor:
    """Dispatch on the configured loss family.

    The raw network output is interpreted as D-hat for position/threshold and
    as the change map R-hat for drift.
    """
    if kind == "position":
        return position_loss(output, d_next, ocean)
    if kind == "drift":
        return drift_loss(output, d_t, d_next, ocean)
    if kind == "threshold":
        return threshold_loss(output, d_next, ocean)
    raise ValueError(f"unknown loss kind {kind!r}")
