"""Dataset manifests: JSON-lines records, deterministic splits, frame
subsampling, merge logic, and directory importers.

Paths inside a manifest are stored relative to the manifest file's directory
so identical runs rooted at different paths produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
import os
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from lesionforge.errors import DuplicateIdError, EmptyInputError, ManifestError

SPLITS = ("train", "val", "test")
KINDS = ("real_positive", "real_negative", "synthetic")


@dataclass(frozen=True)
class ManifestRecord:
    record_id: str
    dataset_id: str
    split: str
    kind: str
    image_path: str
    mask_path: str | None = None
    sequence_id: str | None = None
    provenance: dict | None = None

    def __post_init__(self) -> None:
        if self.split not in SPLITS:
            raise ManifestError(f"split must be one of {SPLITS}, got {self.split!r}")
        if self.kind not in KINDS:
            raise ManifestError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind == "real_negative" and self.mask_path is not None:
            raise ManifestError(f"negative record {self.record_id} must not carry a mask_path")
        if self.kind == "synthetic" and not self.provenance:
            raise ManifestError(f"synthetic record {self.record_id} must carry provenance")

    def to_json(self) -> str:
        payload: dict = {
            "record_id": self.record_id,
            "dataset_id": self.dataset_id,
            "split": self.split,
            "kind": self.kind,
            "image_path": self.image_path,
        }
        if self.mask_path is not None:
            payload["mask_path"] = self.mask_path
        if self.sequence_id is not None:
            payload["sequence_id"] = self.sequence_id
        if self.provenance is not None:
            payload["provenance"] = self.provenance
        return json.dumps(payload, sort_keys=True)

    @staticmethod
    def from_json(line: str) -> "ManifestRecord":
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"bad manifest line: {line[:80]!r}") from exc
        try:
            return ManifestRecord(
                record_id=payload["record_id"],
                dataset_id=payload["dataset_id"],
                split=payload["split"],
                kind=payload["kind"],
                image_path=payload["image_path"],
                mask_path=payload.get("mask_path"),
                sequence_id=payload.get("sequence_id"),
                provenance=payload.get("provenance"),
            )
        except KeyError as exc:
            raise ManifestError(f"manifest line missing field {exc}") from exc


@dataclass(frozen=True)
class DatasetManifest:
    records: tuple[ManifestRecord, ...] = ()

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for rec in self.records:
            if rec.record_id in seen:
                raise DuplicateIdError(f"duplicate record_id {rec.record_id!r}")
            seen.add(rec.record_id)

    def __len__(self) -> int:
        return len(self.records)

    def split_counts(self) -> dict[str, int]:
        counts = {s: 0 for s in SPLITS}
        for rec in self.records:
            counts[rec.split] += 1
        return counts

    def by_split(self, split: str) -> list[ManifestRecord]:
        return [r for r in self.records if r.split == split]

    def by_dataset(self, dataset_id: str) -> list[ManifestRecord]:
        return [r for r in self.records if r.dataset_id == dataset_id]

    def get(self, record_id: str) -> ManifestRecord | None:
        for rec in self.records:
            if rec.record_id == record_id:
                return rec
        return None


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    """Atomic write: temp file in place, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        for rec in manifest.records:
            fh.write(rec.to_json())
            fh.write("\n")
    os.replace(tmp, path)


def load_manifest(path: str | Path) -> DatasetManifest:
    path = Path(path)
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(ManifestRecord.from_json(line))
    return DatasetManifest(tuple(records))


def export_csv(manifest: DatasetManifest, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fields = ["record_id", "dataset_id", "split", "kind", "image_path", "mask_path", "sequence_id"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields + ["provenance"])
        for rec in manifest.records:
            provenance = json.dumps(rec.provenance, sort_keys=True) if rec.provenance else ""
            writer.writerow([getattr(rec, f) or "" for f in fields] + [provenance])


def largest_remainder_sizes(total: int, ratios: Sequence[float]) -> list[int]:
    """Integer split sizes summing to `total`, by largest fractional part;
    ties go to the earlier bucket."""
    exact = [total * r for r in ratios]
    sizes = [math.floor(x) for x in exact]
    leftover = total - sum(sizes)
    order = sorted(range(len(ratios)), key=lambda i: (-(exact[i] - sizes[i]), i))
    for i in order[:leftover]:
        sizes[i] += 1
    return sizes


def split_dataset(
    records: Sequence[ManifestRecord],
    ratios: tuple[float, float, float] = (0.6, 0.2, 0.2),
    seed: int = 0,
) -> DatasetManifest:
    """Deterministic shuffle then contiguous train/val/test partition.

    Records are ordered by record_id first so the shuffle is reproducible
    regardless of input order or platform.
    """
    if not records:
        raise EmptyInputError("no records to split")
    if any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be positive and sum to 1, got {ratios}")
    ordered = sorted(records, key=lambda r: r.record_id)
    rng = random.Random(seed)
    rng.shuffle(ordered)
    sizes = largest_remainder_sizes(len(ordered), ratios)
    out = []
    cursor = 0
    for split, size in zip(SPLITS, sizes):
        for rec in ordered[cursor : cursor + size]:
            out.append(replace(rec, split=split))
        cursor += size
    return DatasetManifest(tuple(out))


def subsample_frames(records: Sequence[ManifestRecord], rate_denominator: int) -> list[ManifestRecord]:
    """Keep every rate_denominator-th frame per video sequence, anchored at
    each sequence's first record (in input order). Records without a
    sequence_id count as singleton sequences and are always kept."""
    if rate_denominator < 1:
        raise ValueError(f"rate_denominator must be >= 1, got {rate_denominator}")
    indices: dict[str, int] = {}
    kept = []
    for rec in records:
        if rec.sequence_id is None:
            kept.append(rec)
            continue
        idx = indices.get(rec.sequence_id, 0)
        indices[rec.sequence_id] = idx + 1
        if idx % rate_denominator == 0:
            kept.append(rec)
    return kept


def merge_for_finetune(base: DatasetManifest, synthetic_selected: DatasetManifest) -> DatasetManifest:
    """Union of the base manifest and selected synthetic records; synthetic
    records may only enter the train split."""
    base_ids = {r.record_id for r in base.records}
    for rec in synthetic_selected.records:
        if rec.record_id in base_ids:
            raise DuplicateIdError(f"record_id {rec.record_id!r} exists in both manifests")
        if rec.split != "train":
            raise ManifestError(f"synthetic record {rec.record_id!r} has split={rec.split!r}, expected train")
        if rec.kind != "synthetic":
            raise ManifestError(f"record {rec.record_id!r} merged as synthetic must have kind=synthetic")
    return DatasetManifest(tuple(base.records) + tuple(synthetic_selected.records))


def import_directory(
    root: str | Path,
    dataset_id: str,
    kind: str = "real_positive",
    images_dir: str = "images",
    masks_dir: str = "masks",
    sequence_from_stem: bool = False,
) -> list[ManifestRecord]:
    """Import the documented on-disk layout into unsplit records.

    Expected tree: <root>/<images_dir>/*.{png,jpg,jpeg} and, for positives,
    <root>/<masks_dir>/<same stem>.png. With sequence_from_stem, the stem's
    leading 'seq-frame' prefix (split on the last '_') becomes the sequence
    id for frame-rate subsampling.
    """
    root = Path(root)
    img_root = root / images_dir
    if not img_root.is_dir():
        raise ManifestError(f"missing images directory: {img_root}")
    records = []
    for img in sorted(img_root.iterdir()):
        if img.suffix.lower() not in (".png", ".jpg", ".jpeg"):
            continue
        stem = img.stem
        mask_path = None
        if kind == "real_positive":
            candidate = root / masks_dir / f"{stem}.png"
            if not candidate.is_file():
                raise ManifestError(f"positive image {img.name} has no mask at {candidate}")
            mask_path = str(candidate.relative_to(root))
        sequence_id = stem.rsplit("_", 1)[0] if sequence_from_stem and "_" in stem else None
        records.append(
            ManifestRecord(
                record_id=f"{dataset_id}/{stem}",
                dataset_id=dataset_id,
                split="train",
                kind=kind,
                image_path=str(img.relative_to(root)),
                mask_path=mask_path,
                sequence_id=sequence_id,
            )
        )
    return records
