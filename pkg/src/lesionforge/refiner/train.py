"""Training loop for the region-gated pseudo-mask refiner."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
import torch
import torch.nn.functional as F

from ..errors import ConfigError, EmptyInputError, NonFiniteLossError
from ..imaging import BinaryMask, RasterImage, ensure_same_shape, resize_image, resize_mask_nearest
from ..metrics import dice
from .infer import image_to_tensor, mask_to_tensor
from .losses import structure_loss
from .model import RegionGatedSegmenter


@dataclass(frozen=True)
class TrainSample:
    sample_id: str
    image: RasterImage
    region: BinaryMask  # area the generator was allowed to write
    target: BinaryMask  # supervision mask

    def __post_init__(self) -> None:
        ensure_same_shape(self.image, self.region, self.target)


@dataclass(frozen=True)
class TrainingSchedule:
    epochs: int = 10
    batch_size: int = 8
    learning_rate: float = 1e-4
    weight_decay: float = 1e-4
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not (self.learning_rate > 0 and math.isfinite(self.learning_rate)):
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be >= 0, got {self.weight_decay}")


@dataclass
class TrainResult:
    history: list[dict[str, Any]] = field(default_factory=list)
    best_epoch: int = -1
    best_val_mdice: float = float("nan")


def _prepare(samples: Sequence[TrainSample], size: int) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    images = torch.cat([image_to_tensor(resize_image(s.image, size, size)) for s in samples])
    regions = torch.cat([mask_to_tensor(resize_mask_nearest(s.region, size, size)) for s in samples])
    targets = torch.cat([mask_to_tensor(resize_mask_nearest(s.target, size, size)) for s in samples])
    return images, regions, targets


def evaluate_mdice(model: RegionGatedSegmenter, samples: Sequence[TrainSample]) -> float:
    """Mean Dice of refined masks against targets, at original resolution."""
    if not samples:
        raise EmptyInputError("no validation samples")
    from .infer import refine  # local import to avoid a cycle at module load

    total = 0.0
    for sample in samples:
        out = refine(model, sample.image, sample.region)
        total += dice(out.refined_mask, sample.target)
    return total / len(samples)


def train_refiner(
    model: RegionGatedSegmenter,
    train_samples: Sequence[TrainSample],
    val_samples: Sequence[TrainSample],
    schedule: TrainingSchedule,
) -> TrainResult:
    """Train with the boundary-weighted structure loss.

    Deterministic for a fixed schedule seed: epoch shuffles come from a
    dedicated numpy generator and torch is seeded before the first step.
    Keeps the state with the best validation mean Dice and restores it into
    `model` before returning.
    """
    if not train_samples:
        raise EmptyInputError("no training samples")
    if not val_samples:
        raise EmptyInputError("no validation samples")

    size = model.config.input_size
    images, regions, targets = _prepare(train_samples, size)

    torch.manual_seed(schedule.seed)
    shuffler = np.random.default_rng(schedule.seed)
    optimizer = torch.optim.AdamW(
        model.parameters(), lr=schedule.learning_rate, weight_decay=schedule.weight_decay
    )

    result = TrainResult()
    best_state: dict[str, torch.Tensor] | None = None
    n = len(train_samples)
    for epoch in range(schedule.epochs):
        model.train()
        order = shuffler.permutation(n)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, n, schedule.batch_size):
            idx = torch.from_numpy(order[start : start + schedule.batch_size].copy())
            optimizer.zero_grad()
            logits = model(images[idx], regions[idx])
            loss = structure_loss(logits, targets[idx])
            if not torch.isfinite(loss):
                raise NonFiniteLossError(f"loss became non-finite at epoch {epoch}")
            loss.backward()
            optimizer.step()
            epoch_loss += float(loss.detach())
            n_batches += 1

        val_mdice = evaluate_mdice(model, val_samples)
        result.history.append(
            {"epoch": epoch, "train_loss": epoch_loss / n_batches, "val_mdice": val_mdice}
        )
        if best_state is None or val_mdice > result.best_val_mdice:
            result.best_epoch = epoch
            result.best_val_mdice = val_mdice
            best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}

    assert best_state is not None
    model.load_state_dict(best_state)
    model.eval()
    return result
