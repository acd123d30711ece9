"""Review-set construction: blinded image groups for human ranking.

A set is one (condition, background) pair rendered by every method under
comparison. Method identities stay server-side; raters only ever see opaque
image ids. The full plan (including the secret bindings) serializes to a
JSON file that the service loads at startup.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from lesionforge.errors import ConfigError, InsufficientCoverageError


@dataclass(frozen=True)
class CandidateImage:
    """One synthetic image offered for review, tagged by producing method."""

    method: str
    condition_id: str
    background_id: str
    image_path: str
    alignment: float | None = None


@dataclass(frozen=True)
class ReviewSet:
    set_id: str
    condition_id: str
    background_id: str
    method_to_image: Mapping[str, str]  # method -> opaque image id (secret)
    background_image: str  # opaque id
    reference_image: str  # opaque id

    def blinded_ids(self) -> list[str]:
        return sorted(self.method_to_image.values())


@dataclass(frozen=True)
class ReviewPlan:
    sets: tuple[ReviewSet, ...]
    images: Mapping[str, str]  # opaque id -> file path
    methods: tuple[str, ...]
    similarity_methods: tuple[str, ...]
    seed: int
    alignment_by_method: Mapping[str, float]

    def set_by_id(self, set_id: str) -> ReviewSet | None:
        for s in self.sets:
            if s.set_id == set_id:
                return s
        return None


def _opaque_id(seed: int, *parts: str) -> str:
    digest = hashlib.sha256(":".join([str(seed), *parts]).encode("utf-8")).hexdigest()
    return f"img-{digest[:16]}"


def build_review_sets(
    candidates: Sequence[CandidateImage],
    background_paths: Mapping[str, str],
    reference_paths: Mapping[str, str],
    methods: Sequence[str],
    similarity_methods: Sequence[str],
    n_sets: int,
    seed: int,
) -> ReviewPlan:
    """Sample n_sets complete (condition, background) pairs and blind them.

    A pair is complete when every requested method contributed an image and
    the pair's background and reference images are resolvable. Sampling and
    id assignment are deterministic in the seed.
    """
    methods = tuple(methods)
    similarity_methods = tuple(similarity_methods)
    if not methods:
        raise ConfigError("methods list is empty")
    if not set(similarity_methods) <= set(methods):
        raise ConfigError("similarity_methods must be a subset of methods")
    if n_sets < 1:
        raise ConfigError(f"n_sets must be >= 1, got {n_sets}")

    by_pair: dict[tuple[str, str], dict[str, CandidateImage]] = {}
    for cand in candidates:
        slot = by_pair.setdefault((cand.condition_id, cand.background_id), {})
        slot.setdefault(cand.method, cand)

    complete = [
        pair
        for pair, slot in by_pair.items()
        if set(slot) >= set(methods)
        and pair[1] in background_paths
        and pair[0] in reference_paths
    ]
    if len(complete) < n_sets:
        raise InsufficientCoverageError(
            f"only {len(complete)} complete pairs available, {n_sets} requested"
        )
    complete.sort()
    random.Random(seed).shuffle(complete)
    chosen = complete[:n_sets]

    sets: list[ReviewSet] = []
    images: dict[str, str] = {}
    for i, (condition_id, background_id) in enumerate(chosen):
        set_id = f"set-{i:03d}"
        slot = by_pair[(condition_id, background_id)]
        bindings = {}
        for method in methods:
            oid = _opaque_id(seed, set_id, method)
            bindings[method] = oid
            images[oid] = slot[method].image_path
        bg_id = _opaque_id(seed, set_id, "background")
        ref_id = _opaque_id(seed, set_id, "reference")
        images[bg_id] = str(background_paths[background_id])
        images[ref_id] = str(reference_paths[condition_id])
        sets.append(
            ReviewSet(
                set_id=set_id,
                condition_id=condition_id,
                background_id=background_id,
                method_to_image=bindings,
                background_image=bg_id,
                reference_image=ref_id,
            )
        )

    align_sums: dict[str, list[float]] = {}
    for cand in candidates:
        if cand.alignment is not None and cand.method in methods:
            align_sums.setdefault(cand.method, []).append(cand.alignment)
    alignment = {m: sum(v) / len(v) for m, v in sorted(align_sums.items())}

    return ReviewPlan(
        sets=tuple(sets),
        images=images,
        methods=methods,
        similarity_methods=similarity_methods,
        seed=seed,
        alignment_by_method=alignment,
    )


def save_plan(plan: ReviewPlan, path: str | Path) -> None:
    payload = {
        "seed": plan.seed,
        "methods": list(plan.methods),
        "similarity_methods": list(plan.similarity_methods),
        "images": dict(plan.images),
        "alignment_by_method": dict(plan.alignment_by_method),
        "sets": [
            {
                "set_id": s.set_id,
                "condition_id": s.condition_id,
                "background_id": s.background_id,
                "method_to_image": dict(s.method_to_image),
                "background_image": s.background_image,
                "reference_image": s.reference_image,
            }
            for s in plan.sets
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_plan(path: str | Path) -> ReviewPlan:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    sets = tuple(
        ReviewSet(
            set_id=s["set_id"],
            condition_id=s["condition_id"],
            background_id=s["background_id"],
            method_to_image=s["method_to_image"],
            background_image=s["background_image"],
            reference_image=s["reference_image"],
        )
        for s in payload["sets"]
    )
    return ReviewPlan(
        sets=sets,
        images=payload["images"],
        methods=tuple(payload["methods"]),
        similarity_methods=tuple(payload["similarity_methods"]),
        seed=int(payload["seed"]),
        alignment_by_method=payload.get("alignment_by_method", {}),
    )
