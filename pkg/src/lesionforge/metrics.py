"""Overlap metrics, score classification, dataset aggregation, rank averaging."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from lesionforge.errors import (
    DimMismatchError,
    EmptyInputError,
    InconsistentMethodSetError,
    InvalidPermutationError,
)
from lesionforge.imaging import BinaryMask

# Inclusive classification thresholds for synthetic-sample scores.
ALIGN_THRESHOLD = 0.93
CONFIDENCE_THRESHOLD = 0.9


@dataclass(frozen=True)
class SampleScores:
    """Alignment/confidence of one synthetic sample plus its class flags."""

    alignment: float
    confidence: float
    well_aligned: bool
    hard: bool


@dataclass(frozen=True)
class DatasetResult:
    dataset_id: str
    mdice: float
    miou: float
    n_images: int


@dataclass(frozen=True)
class EvalReport:
    """Per-dataset means plus their unweighted overall mean."""

    per_dataset: tuple[DatasetResult, ...]
    overall_mdice: float
    overall_miou: float

    def to_dict(self) -> dict:
        return {
            "per_dataset": [
                {
                    "dataset_id": d.dataset_id,
                    "mDice": d.mdice,
                    "mIoU": d.miou,
                    "n_images": d.n_images,
                }
                for d in self.per_dataset
            ],
            "overall": {"mDice": self.overall_mdice, "mIoU": self.overall_miou},
        }

    @staticmethod
    def from_dict(payload: Mapping) -> "EvalReport":
        per = tuple(
            DatasetResult(d["dataset_id"], float(d["mDice"]), float(d["mIoU"]), int(d["n_images"]))
            for d in payload["per_dataset"]
        )
        return EvalReport(per, float(payload["overall"]["mDice"]), float(payload["overall"]["mIoU"]))

    def to_text(self) -> str:
        rows = [f"{'dataset':<20} {'mDice':>7} {'mIoU':>7} {'n':>6}"]
        for d in self.per_dataset:
            rows.append(f"{d.dataset_id:<20} {d.mdice:>7.3f} {d.miou:>7.3f} {d.n_images:>6d}")
        total = sum(d.n_images for d in self.per_dataset)
        rows.append(f"{'Overall':<20} {self.overall_mdice:>7.3f} {self.overall_miou:>7.3f} {total:>6d}")
        return "\n".join(rows)


def _overlap_counts(a: BinaryMask, b: BinaryMask) -> tuple[int, int, int]:
    if a.shape != b.shape:
        raise DimMismatchError(f"mask shapes differ: {a.shape} vs {b.shape}")
    inter = int(np.logical_and(a.data, b.data).sum())
    return inter, a.foreground_count, b.foreground_count


def dice(a: BinaryMask, b: BinaryMask) -> float:
    """2|a∩b| / (|a|+|b|); 1.0 when both masks are empty."""
    inter, na, nb = _overlap_counts(a, b)
    if na + nb == 0:
        return 1.0
    return 2.0 * inter / (na + nb)


def iou(a: BinaryMask, b: BinaryMask) -> float:
    """|a∩b| / |a∪b|; 1.0 when both masks are empty."""
    inter, na, nb = _overlap_counts(a, b)
    union = na + nb - inter
    if union == 0:
        return 1.0
    return inter / union


def score_sample(refined: BinaryMask, condition: BinaryMask, initial_pred: BinaryMask) -> SampleScores:
    """Score a synthetic sample: alignment vs its condition mask, confidence
    vs the downstream model's initial prediction; both thresholds inclusive."""
    if not (refined.shape == condition.shape == initial_pred.shape):
        raise DimMismatchError(
            f"mask shapes differ: {refined.shape}, {condition.shape}, {initial_pred.shape}"
        )
    alignment = dice(refined, condition)
    confidence = dice(refined, initial_pred)
    return SampleScores(
        alignment=alignment,
        confidence=confidence,
        well_aligned=alignment >= ALIGN_THRESHOLD,
        hard=confidence <= CONFIDENCE_THRESHOLD,
    )


def aggregate(per_image: Sequence[tuple[str, float, float]]) -> EvalReport:
    """Aggregate per-image (dataset_id, dice, iou) rows.

    Per-dataset means first, then the overall row is the unweighted mean of
    the per-dataset means (datasets count equally regardless of size).
    """
    if not per_image:
        raise EmptyInputError("aggregate needs at least one per-image row")
    buckets: dict[str, list[tuple[float, float]]] = {}
    for dataset_id, d, i in per_image:
        buckets.setdefault(dataset_id, []).append((float(d), float(i)))
    per_dataset = []
    for dataset_id in sorted(buckets):
        vals = buckets[dataset_id]
        mdice = sum(v[0] for v in vals) / len(vals)
        miou = sum(v[1] for v in vals) / len(vals)
        per_dataset.append(DatasetResult(dataset_id, mdice, miou, len(vals)))
    overall_mdice = sum(d.mdice for d in per_dataset) / len(per_dataset)
    overall_miou = sum(d.miou for d in per_dataset) / len(per_dataset)
    return EvalReport(tuple(per_dataset), overall_mdice, overall_miou)


@dataclass(frozen=True)
class MethodRanking:
    method: str
    avg_naturalness: float
    avg_similarity: float | None  # None: criterion not applicable


def _check_permutation(ranks: Mapping[str, int], label: str) -> None:
    values = sorted(int(v) for v in ranks.values())
    if values != list(range(1, len(ranks) + 1)):
        raise InvalidPermutationError(f"{label} ranks {dict(ranks)} are not a permutation of 1..{len(ranks)}")


def average_rankings(
    records: Iterable[tuple[Mapping[str, int], Mapping[str, int]]],
) -> list[MethodRanking]:
    """Average per-method ranks over (naturalness, similarity) rank maps.

    Every record must rank the same method set per criterion; within a record
    the ranks must form a permutation of 1..k. Methods absent from every
    similarity map report that criterion as not applicable.
    """
    records = list(records)
    if not records:
        raise EmptyInputError("no ranking records")
    nat_methods = frozenset(records[0][0])
    sim_methods = frozenset(records[0][1])
    if not sim_methods <= nat_methods:
        raise InconsistentMethodSetError("similarity methods must be a subset of naturalness methods")
    nat_sums: dict[str, float] = {m: 0.0 for m in nat_methods}
    sim_sums: dict[str, float] = {m: 0.0 for m in sim_methods}
    for nat, sim in records:
        if frozenset(nat) != nat_methods or frozenset(sim) != sim_methods:
            raise InconsistentMethodSetError("records rank different method sets")
        _check_permutation(nat, "naturalness")
        if sim:
            _check_permutation(sim, "similarity")
        for m, r in nat.items():
            nat_sums[m] += int(r)
        for m, r in sim.items():
            sim_sums[m] += int(r)
    n = len(records)
    out = []
    for m in sorted(nat_methods):
        sim_avg = sim_sums[m] / n if m in sim_methods else None
        out.append(MethodRanking(m, nat_sums[m] / n, sim_avg))
    return out
