"""Classify scored synthetic samples and pick the subset worth fine-tuning on."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

from lesionforge.metrics import ALIGN_THRESHOLD, CONFIDENCE_THRESHOLD, SampleScores


@dataclass(frozen=True)
class SelectionPolicy:
    """Filter flags, thresholds, and the per-dataset cap.

    Over-subscribed buckets keep the lowest-confidence (hardest) samples;
    ties break by sample id.
    """

    require_aligned: bool = True
    require_hard: bool = True
    align_threshold: float = ALIGN_THRESHOLD
    confidence_threshold: float = CONFIDENCE_THRESHOLD
    per_dataset_cap: int | None = None

    def __post_init__(self) -> None:
        for name in ("align_threshold", "confidence_threshold"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.per_dataset_cap is not None and self.per_dataset_cap < 1:
            raise ValueError(f"per_dataset_cap must be >= 1, got {self.per_dataset_cap}")

    def admits(self, scores: SampleScores) -> bool:
        if self.require_aligned and not scores.alignment >= self.align_threshold:
            return False
        if self.require_hard and not scores.confidence <= self.confidence_threshold:
            return False
        return True


def select(
    samples: Sequence[tuple[str, str, SampleScores]],
    policy: SelectionPolicy,
) -> list[str]:
    """Filter by the policy's active flags, then cap each dataset bucket.

    Output order is deterministic: dataset id, then hardness rank. An empty
    result is valid (caller surfaces a warning).
    """
    buckets: dict[str, list[tuple[float, str]]] = {}
    for sample_id, dataset_id, scores in samples:
        if policy.admits(scores):
            buckets.setdefault(dataset_id, []).append((scores.confidence, sample_id))
    out: list[str] = []
    for dataset_id in sorted(buckets):
        ranked = sorted(buckets[dataset_id])
        if policy.per_dataset_cap is not None:
            ranked = ranked[: policy.per_dataset_cap]
        out.extend(sample_id for _, sample_id in ranked)
    return out


ABLATION_CAP = 200


def ablation_policies() -> list[tuple[str, SelectionPolicy]]:
    """The four cumulative selection policies of the component ablation:
    unfiltered (raw condition labels), unfiltered (refined labels),
    aligned-only, aligned+hard; all capped per dataset.

    Which label mask feeds fine-tuning is pipeline wiring, not policy; the
    first two entries share one policy on purpose.
    """
    unfiltered = SelectionPolicy(require_aligned=False, require_hard=False, per_dataset_cap=ABLATION_CAP)
    aligned = replace(unfiltered, require_aligned=True)
    aligned_hard = replace(aligned, require_hard=True)
    return [
        ("aug_condition_labels", unfiltered),
        ("aug_refined_labels", unfiltered),
        ("aligned_only", aligned),
        ("aligned_hard", aligned_hard),
    ]
