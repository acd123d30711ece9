"""Deterministic generation schedules: conditions crossed with backgrounds.

Backgrounds live in per-dataset buckets; each condition draws its quota
round-robin across buckets (sorted bucket ids, one per visit) through
per-bucket cursors, so usage stays balanced across the whole plan and no
background repeats within a condition's draw.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from typing import Sequence

from lesionforge.errors import EmptyInputError, PoolExhaustedError
from lesionforge.imaging import BinaryMask, RasterImage, dilate_mask
from lesionforge.inpaint.core import (
    DEFAULT_NOISE_STRENGTH,
    DEFAULT_SAMPLING_STEPS,
    InpaintRequest,
)

DEFAULT_DILATION_PX = 16


@dataclass(frozen=True)
class PlannedPair:
    condition_index: int
    background_index: int
    seed: int


def derive_seed(seed: int, *parts: object) -> int:
    """Stable 63-bit seed from the global seed plus identifying parts."""
    text = ":".join([str(seed), *map(str, parts)])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def plan_pairings(
    n_conditions: int,
    background_datasets: Sequence[str],
    backgrounds_per_condition: int,
    seed: int,
) -> list[PlannedPair]:
    """Symbolic schedule over condition/background indices."""
    if n_conditions < 1 or not background_datasets:
        raise EmptyInputError("condition and background pools must be nonempty")
    if backgrounds_per_condition < 1:
        raise ValueError("backgrounds_per_condition must be >= 1")

    buckets: dict[str, list[int]] = {}
    for idx, dataset_id in enumerate(background_datasets):
        buckets.setdefault(dataset_id, []).append(idx)
    bucket_ids = sorted(buckets)
    for dataset_id in bucket_ids:
        random.Random(derive_seed(seed, "bucket", dataset_id)).shuffle(buckets[dataset_id])

    # per-condition per-bucket quota under round-robin bucket cycling
    need: dict[str, int] = {b: 0 for b in bucket_ids}
    for j in range(backgrounds_per_condition):
        need[bucket_ids[j % len(bucket_ids)]] += 1
    for dataset_id in bucket_ids:
        if need[dataset_id] > len(buckets[dataset_id]):
            raise PoolExhaustedError(
                f"bucket {dataset_id!r} has {len(buckets[dataset_id])} backgrounds, "
                f"needs {need[dataset_id]} per condition"
            )

    cursors = {b: 0 for b in bucket_ids}
    pairs: list[PlannedPair] = []
    for cond_idx in range(n_conditions):
        for j in range(backgrounds_per_condition):
            bucket = bucket_ids[j % len(bucket_ids)]
            items = buckets[bucket]
            bg_idx = items[cursors[bucket] % len(items)]
            cursors[bucket] += 1
            pairs.append(
                PlannedPair(
                    condition_index=cond_idx,
                    background_index=bg_idx,
                    seed=derive_seed(seed, "request", cond_idx, bg_idx),
                )
            )
    return pairs


def plan_generation(
    condition_pool: Sequence[tuple[BinaryMask, RasterImage | None]],
    background_pool: Sequence[RasterImage],
    backgrounds_per_condition: int,
    seed: int,
    background_datasets: Sequence[str] | None = None,
    dilation_px: int = DEFAULT_DILATION_PX,
    noise_strength: float = DEFAULT_NOISE_STRENGTH,
    sampling_steps: int = DEFAULT_SAMPLING_STEPS,
) -> list[InpaintRequest]:
    """Materialize the schedule into requests; the inpaint region is the
    boundary condition dilated by `dilation_px`."""
    if not condition_pool or not background_pool:
        raise EmptyInputError("condition and background pools must be nonempty")
    if background_datasets is None:
        background_datasets = ["pool"] * len(background_pool)
    if len(background_datasets) != len(background_pool):
        raise ValueError("background_datasets must parallel background_pool")

    pairs = plan_pairings(len(condition_pool), background_datasets, backgrounds_per_condition, seed)
    regions = [dilate_mask(cond, dilation_px) for cond, _ in condition_pool]
    requests = []
    for pair in pairs:
        cond, surface = condition_pool[pair.condition_index]
        requests.append(
            InpaintRequest(
                background=background_pool[pair.background_index],
                inpaint_region=regions[pair.condition_index],
                boundary_condition=cond,
                surface_reference=surface,
                noise_strength=noise_strength,
                sampling_steps=sampling_steps,
                seed=pair.seed,
            )
        )
    return requests
