"""Stage orchestration: generate, refine-score, select, finetune, evaluate.

Each stage reads its inputs from the previous stage's declared artifact,
writes into its own slice of the output root, and is individually resumable.
All randomness is derived from the config seed, so a rerun with the same
config reproduces every manifest and report byte for byte (toy backend).

Output layout under `paths.output_root`:
    baseline.pt refiner.pt finetuned.pt        model checkpoints
    synthetic.jsonl refined.jsonl selected.jsonl merged.jsonl
    synthetic/{images,regions,conditions}/*.png
    refined/{masks,preds}/*.png
    report.json report.txt
"""

from __future__ import annotations

import json
import logging
import os
import random
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from .config import PipelineConfig
from .errors import (
    GenerationAbortedError,
    MissingArtifactError,
    NoFeasiblePlacementError,
)
from .imaging import (
    BinaryMask,
    RasterImage,
    all_ones_mask,
    crop_to_bbox,
    dilate_mask,
    empty_mask,
    load_image,
    load_mask,
    resize_mask_nearest,
    save_image,
    save_mask,
)
from .inpaint.core import BackendDescriptor, InpaintRequest, inpaint
from .inpaint.planning import derive_seed, plan_pairings
from .inpaint.remote import RemoteBackendClient
from .manifest import (
    DatasetManifest,
    ManifestRecord,
    load_manifest,
    merge_for_finetune,
    save_manifest,
)
from .metrics import EvalReport, SampleScores, aggregate, dice, iou, score_sample
from .placement import place_conditions
from .refiner import (
    RegionGatedSegmenter,
    TrainingSchedule,
    TrainSample,
    build_model,
    load_checkpoint,
    refine,
    save_checkpoint,
    train_refiner,
)
from .selection import SelectionPolicy, select

log = logging.getLogger("lesionforge.pipeline")

BASELINE_CKPT = "baseline.pt"
REFINER_CKPT = "refiner.pt"
FINETUNED_CKPT = "finetuned.pt"
SYNTHETIC_MANIFEST = "synthetic.jsonl"
REFINED_MANIFEST = "refined.jsonl"
SELECTED_MANIFEST = "selected.jsonl"
MERGED_MANIFEST = "merged.jsonl"


def _out(config: PipelineConfig) -> Path:
    root = Path(config.paths.output_root)
    root.mkdir(parents=True, exist_ok=True)
    return root


def _manifest_dir(config: PipelineConfig) -> Path:
    return Path(config.paths.manifest).parent


def _require(path: Path, producer: str) -> Path:
    if not path.exists():
        raise MissingArtifactError(f"{path} not found; run the {producer!r} subcommand first")
    return path


def _load_base(config: PipelineConfig) -> DatasetManifest:
    path = Path(config.paths.manifest)
    if not path.is_file():
        raise MissingArtifactError(f"base manifest not found: {path}")
    return load_manifest(path)


def _rebase_record(rec: ManifestRecord, from_dir: Path, to_dir: Path) -> ManifestRecord:
    """Rewrite a record's artifact paths from one manifest directory to another."""

    def move(rel: str | None) -> str | None:
        if rel is None:
            return None
        return os.path.relpath(from_dir / rel, to_dir)

    return replace(rec, image_path=move(rec.image_path), mask_path=move(rec.mask_path))


def _backend_descriptor(config: PipelineConfig) -> BackendDescriptor:
    b = config.backend
    return BackendDescriptor(name=b.name, variant=b.variant, training_provenance=b.training_provenance)


def _backend_client(config: PipelineConfig) -> RemoteBackendClient | None:
    if config.backend.name == "toy":
        return None
    return RemoteBackendClient(config.backend.endpoint)


def _full_frame_samples(
    records: Sequence[ManifestRecord], root: Path, sample_ids: bool = False
) -> list[TrainSample]:
    """Segmentation samples over the whole frame: negatives get empty targets."""
    out = []
    for rec in records:
        img = load_image(root / rec.image_path)
        if rec.mask_path is None:
            target = empty_mask(img.height, img.width)
        else:
            target = load_mask(root / rec.mask_path)
        out.append(TrainSample(rec.record_id, img, all_ones_mask(img.height, img.width), target))
    return out


# ---------------------------------------------------------------- stage 1


def cmd_train_baseline(config: PipelineConfig) -> Path:
    """Train the downstream segmenter on the real training split (stage 1)."""
    out = _out(config)
    ckpt = out / BASELINE_CKPT
    if ckpt.exists():
        log.info("baseline checkpoint already present at %s; skipping", ckpt)
        return ckpt
    base = _load_base(config)
    root = _manifest_dir(config)
    train = _full_frame_samples(base.by_split("train"), root)
    val = _full_frame_samples(base.by_split("val"), root)
    model = build_model(config.refiner, seed=derive_seed(config.seed, "baseline-init"))
    schedule = config.baseline_schedule.as_schedule(derive_seed(config.seed, "baseline-train"))
    result = train_refiner(model, train, val, schedule)
    save_checkpoint(
        ckpt,
        model,
        config.refiner,
        history=result.history,
        meta={"stage": "baseline", "best_epoch": result.best_epoch, "best_val_mdice": result.best_val_mdice},
    )
    log.info("baseline trained: best val mDice %.4f", result.best_val_mdice)
    return ckpt


# ---------------------------------------------------------------- generate


def _load_condition(rec: ManifestRecord, root: Path) -> tuple[RasterImage, BinaryMask]:
    return load_image(root / rec.image_path), load_mask(root / rec.mask_path)


def _generate_one(
    config: PipelineConfig,
    rid: str,
    cond_rec: ManifestRecord,
    bg_rec: ManifestRecord,
    seed: int,
    root: Path,
    out: Path,
) -> ManifestRecord:
    cond_img, cond_mask = _load_condition(cond_rec, root)
    bg = load_image(root / bg_rec.image_path)
    if cond_mask.shape != bg.shape:
        cond_mask = resize_mask_nearest(cond_mask, bg.height, bg.width)
    region = dilate_mask(cond_mask, config.engine.dilation_px)
    reference = crop_to_bbox(cond_img, cond_mask)

    if config.placement.use_placement:
        placed = place_conditions(bg, region, cond_mask, reference, stride=config.placement.stride)
        region, cond_mask = placed.moved_inpaint_region, placed.moved_condition

    surface = reference if config.backend.variant == "V2" else None
    request = InpaintRequest(
        background=bg,
        inpaint_region=region,
        boundary_condition=cond_mask,
        surface_reference=surface,
        noise_strength=config.engine.noise_strength,
        sampling_steps=config.engine.sampling_steps,
        seed=seed,
    )
    image = inpaint(request, _backend_descriptor(config), client=_backend_client(config))

    save_image(image, out / "synthetic" / "images" / f"{rid}.png")
    save_mask(cond_mask, out / "synthetic" / "conditions" / f"{rid}.png")
    save_mask(region, out / "synthetic" / "regions" / f"{rid}.png")
    return ManifestRecord(
        record_id=rid,
        dataset_id=bg_rec.dataset_id,
        split="train",
        kind="synthetic",
        image_path=f"synthetic/images/{rid}.png",
        mask_path=f"synthetic/conditions/{rid}.png",
        provenance={
            "condition_id": cond_rec.record_id,
            "background_id": bg_rec.record_id,
            "backend": f"{config.backend.name}/{config.backend.variant}",
            "seed": seed,
            "region_path": f"synthetic/regions/{rid}.png",
            "selected": False,
        },
    )


def cmd_generate(config: PipelineConfig) -> Path:
    """Plan condition/background pairings and inpaint each request.

    Resumable: rows already in the output manifest with the same seed and an
    existing image file are kept as-is. Aborts when the per-sample failure
    rate exceeds `engine.max_failure_rate`.
    """
    out = _out(config)
    base = _load_base(config)
    root = _manifest_dir(config)
    train = base.by_split("train")
    conditions = [r for r in train if r.kind == "real_positive"]
    backgrounds = [r for r in train if r.kind == "real_negative"]
    if not conditions or not backgrounds:
        raise MissingArtifactError("base manifest needs real_positive and real_negative train records")

    pairs = plan_pairings(
        len(conditions),
        [r.dataset_id for r in backgrounds],
        config.engine.backgrounds_per_condition,
        derive_seed(config.seed, "generation"),
    )

    manifest_path = out / SYNTHETIC_MANIFEST
    existing: dict[str, ManifestRecord] = {}
    if manifest_path.exists():
        existing = {r.record_id: r for r in load_manifest(manifest_path).records}

    for sub in ("images", "conditions", "regions"):
        (out / "synthetic" / sub).mkdir(parents=True, exist_ok=True)

    rows: list[ManifestRecord] = []
    failures: list[str] = []
    reused = 0
    for idx, pair in enumerate(pairs):
        rid = f"syn-{idx:05d}"
        prev = existing.get(rid)
        if (
            prev is not None
            and prev.provenance.get("seed") == pair.seed
            and (out / prev.image_path).exists()
        ):
            rows.append(prev)
            reused += 1
            continue
        cond_rec = conditions[pair.condition_index]
        bg_rec = backgrounds[pair.background_index]
        try:
            rows.append(_generate_one(config, rid, cond_rec, bg_rec, pair.seed, root, out))
        except (NoFeasiblePlacementError, OSError) as exc:
            log.warning("generation failed for %s (%s x %s): %s", rid, cond_rec.record_id, bg_rec.record_id, exc)
            failures.append(rid)
        if len(failures) > config.engine.max_failure_rate * len(pairs):
            raise GenerationAbortedError(
                f"{len(failures)} of {len(pairs)} generations failed, over the "
                f"{config.engine.max_failure_rate:.0%} abort threshold"
            )

    save_manifest(DatasetManifest(tuple(rows)), manifest_path)
    log.info("generated %d samples (%d reused, %d failed)", len(rows), reused, len(failures))
    return manifest_path


# ---------------------------------------------------------------- refiner


def _synthetic_samples(manifest: DatasetManifest, out: Path) -> list[TrainSample]:
    samples = []
    for rec in manifest.records:
        img = load_image(out / rec.image_path)
        region = load_mask(out / rec.provenance["region_path"])
        target = load_mask(out / rec.mask_path)
        samples.append(TrainSample(rec.record_id, img, region, target))
    return samples


def cmd_train_refiner(config: PipelineConfig) -> Path:
    """Train the region-gated refiner on the synthetic set (condition masks
    as supervision), holding out a deterministic validation slice."""
    out = _out(config)
    ckpt = out / REFINER_CKPT
    if ckpt.exists():
        log.info("refiner checkpoint already present at %s; skipping", ckpt)
        return ckpt
    manifest = load_manifest(_require(out / SYNTHETIC_MANIFEST, "generate"))
    samples = _synthetic_samples(manifest, out)
    order = sorted(range(len(samples)), key=lambda i: samples[i].sample_id)
    random.Random(derive_seed(config.seed, "refiner-holdout")).shuffle(order)
    n_val = max(1, len(samples) // 6)
    val = [samples[i] for i in order[:n_val]]
    train = [samples[i] for i in order[n_val:]]

    model = build_model(config.refiner, seed=derive_seed(config.seed, "refiner-init"))
    schedule = config.refiner_schedule.as_schedule(derive_seed(config.seed, "refiner-train"))
    result = train_refiner(model, train, val, schedule)
    save_checkpoint(
        ckpt,
        model,
        config.refiner,
        history=result.history,
        meta={"stage": "refiner", "best_epoch": result.best_epoch, "best_val_mdice": result.best_val_mdice},
    )
    log.info("refiner trained: best val mDice %.4f", result.best_val_mdice)
    return ckpt


def _load_model(path: Path, producer: str) -> RegionGatedSegmenter:
    _require(path, producer)
    model, _, _ = load_checkpoint(path)
    return model


def cmd_refine_and_score(config: PipelineConfig) -> Path:
    """Refine every synthetic sample's pseudo-mask and score it.

    Adds to each row: the refined mask path, the baseline model's initial
    prediction path, and alignment/confidence scores with their class flags.
    """
    out = _out(config)
    manifest = load_manifest(_require(out / SYNTHETIC_MANIFEST, "generate"))
    refiner = _load_model(out / REFINER_CKPT, "train-refiner")
    baseline = _load_model(out / BASELINE_CKPT, "train-baseline")

    (out / "refined" / "masks").mkdir(parents=True, exist_ok=True)
    (out / "refined" / "preds").mkdir(parents=True, exist_ok=True)

    rows = []
    for rec in manifest.records:
        rid = rec.record_id
        img = load_image(out / rec.image_path)
        region = load_mask(out / rec.provenance["region_path"])
        condition = load_mask(out / rec.mask_path)

        refined = refine(refiner, img, region).refined_mask
        initial = refine(baseline, img, all_ones_mask(img.height, img.width)).refined_mask
        scores = score_sample(refined, condition, initial)

        save_mask(refined, out / "refined" / "masks" / f"{rid}.png")
        save_mask(initial, out / "refined" / "preds" / f"{rid}.png")
        provenance = dict(rec.provenance)
        provenance.update(
            refined_mask_path=f"refined/masks/{rid}.png",
            initial_pred_path=f"refined/preds/{rid}.png",
            scores={
                "alignment": scores.alignment,
                "confidence": scores.confidence,
                "well_aligned": scores.well_aligned,
                "hard": scores.hard,
            },
        )
        rows.append(replace(rec, provenance=provenance))

    path = out / REFINED_MANIFEST
    save_manifest(DatasetManifest(tuple(rows)), path)
    log.info("refined and scored %d samples", len(rows))
    return path


# ---------------------------------------------------------------- select


def _scores_from_row(rec: ManifestRecord) -> SampleScores:
    s = rec.provenance["scores"]
    return SampleScores(
        alignment=float(s["alignment"]),
        confidence=float(s["confidence"]),
        well_aligned=bool(s["well_aligned"]),
        hard=bool(s["hard"]),
    )


def cmd_select(config: PipelineConfig) -> Path:
    """Apply the selection policy and emit the chosen rows.

    The emitted rows point their mask_path at the refined mask (or the raw
    condition mask when `selection.use_refined_labels` is off) and carry
    provenance.selected = True.
    """
    out = _out(config)
    manifest = load_manifest(_require(out / REFINED_MANIFEST, "refine-score"))
    policy = SelectionPolicy(
        require_aligned=config.selection.require_aligned,
        require_hard=config.selection.require_hard,
        align_threshold=config.selection.align_threshold,
        confidence_threshold=config.selection.confidence_threshold,
        per_dataset_cap=config.selection.per_dataset_cap,
    )
    scored = [(rec.record_id, rec.dataset_id, _scores_from_row(rec)) for rec in manifest.records]
    chosen = select(scored, policy)
    if not chosen:
        log.warning("selection admitted no samples; fine-tuning would see real data only")
    by_id = {rec.record_id: rec for rec in manifest.records}
    rows = []
    for rid in chosen:
        rec = by_id[rid]
        mask_path = rec.provenance["refined_mask_path"] if config.selection.use_refined_labels else rec.mask_path
        rows.append(
            replace(rec, mask_path=mask_path, provenance={**rec.provenance, "selected": True})
        )
    path = out / SELECTED_MANIFEST
    save_manifest(DatasetManifest(tuple(rows)), path)
    log.info("selected %d of %d samples", len(rows), len(scored))
    return path


# ---------------------------------------------------------------- finetune


def cmd_finetune(config: PipelineConfig) -> Path:
    """Stage-2 training: continue from the baseline checkpoint on the merged
    real + selected synthetic training set."""
    out = _out(config)
    base = _load_base(config)
    root = _manifest_dir(config)
    selected = load_manifest(_require(out / SELECTED_MANIFEST, "select"))

    rebased = DatasetManifest(tuple(_rebase_record(r, root, out) for r in base.records))
    merged = merge_for_finetune(rebased, selected)
    save_manifest(merged, out / MERGED_MANIFEST)

    model = _load_model(out / BASELINE_CKPT, "train-baseline")
    train = _full_frame_samples([r for r in merged.records if r.split == "train"], out)
    val = _full_frame_samples(merged.by_split("val"), out)
    schedule = TrainingSchedule(
        epochs=config.finetune.epochs,
        batch_size=config.finetune.batch_size,
        learning_rate=config.finetune.learning_rate,
        weight_decay=config.finetune.weight_decay,
        seed=derive_seed(config.seed, "finetune"),
    )
    result = train_refiner(model, train, val, schedule)
    ckpt = out / FINETUNED_CKPT
    save_checkpoint(
        ckpt,
        model,
        config.refiner,
        history=result.history,
        meta={"stage": "finetune", "best_epoch": result.best_epoch, "best_val_mdice": result.best_val_mdice},
    )
    log.info("fine-tuned: best val mDice %.4f", result.best_val_mdice)
    return ckpt


# ---------------------------------------------------------------- evaluate


def cmd_evaluate(config: PipelineConfig, weights: str | Path | None = None) -> EvalReport:
    """Evaluate a checkpoint on the test split, one row per dataset.

    Defaults to the fine-tuned checkpoint, falling back to the baseline when
    no fine-tuned weights exist yet.
    """
    out = _out(config)
    if weights is not None:
        ckpt = Path(weights)
        model = _load_model(ckpt, "finetune")
    else:
        ckpt = out / FINETUNED_CKPT
        if not ckpt.exists():
            ckpt = out / BASELINE_CKPT
        model = _load_model(ckpt, "finetune (or train-baseline)")

    base = _load_base(config)
    root = _manifest_dir(config)
    test = [r for r in base.by_split("test") if r.kind == "real_positive"]
    if config.eval_datasets:
        wanted = set(config.eval_datasets)
        test = [r for r in test if r.dataset_id in wanted]
    if not test:
        raise MissingArtifactError("no positive test records match the eval dataset list")

    per_image = []
    for rec in test:
        img = load_image(root / rec.image_path)
        gt = load_mask(root / rec.mask_path)
        pred = refine(model, img, all_ones_mask(img.height, img.width)).refined_mask
        per_image.append((rec.dataset_id, dice(pred, gt), iou(pred, gt)))
    report = aggregate(per_image)
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    (out / "report.txt").write_text(report.to_text() + "\n")
    log.info("evaluated %d images from %s", len(per_image), ckpt.name)
    return report


def ablation_table(rows: Sequence[tuple[str, EvalReport]]) -> str:
    """Combine named runs into one table, mirroring the component ablation:
    one row per run, per-dataset mDice columns plus the overall mean."""
    if not rows:
        return ""
    datasets = [d.dataset_id for d in rows[0][1].per_dataset]
    width = max(12, *(len(name) for name, _ in rows))
    header = f"{'run':<{width}} " + " ".join(f"{d:>10}" for d in datasets) + f" {'Overall':>10}"
    lines = [header]
    for name, report in rows:
        by_id = {d.dataset_id: d for d in report.per_dataset}
        cells = " ".join(
            f"{by_id[d].mdice:>10.3f}" if d in by_id else f"{'-':>10}" for d in datasets
        )
        lines.append(f"{name:<{width}} {cells} {report.overall_mdice:>10.3f}")
    return "\n".join(lines)
