"""Command-line entry point: one subcommand per pipeline stage."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .config import (
    EngineConfig,
    PipelineConfig,
    StageScheduleConfig,
    apply_endpoint_override,
    load_config,
    save_config,
)
from .errors import BackendUnavailableError, LesionForgeError
from .manifest import load_manifest, save_manifest
from .metrics import EvalReport
from .refiner.model import RefinerConfig

ENDPOINT_ENV = "LESIONFORGE_ENDPOINT"

log = logging.getLogger("lesionforge.cli")


def _desk_config() -> PipelineConfig:
    """Defaults sized for a CPU-only run on 64x64 toy data."""
    return PipelineConfig(
        engine=EngineConfig(dilation_px=4, backgrounds_per_condition=2),
        refiner=RefinerConfig(input_size=64),
        refiner_schedule=StageScheduleConfig(epochs=8),
        baseline_schedule=StageScheduleConfig(epochs=8),
    )


def _load(args: argparse.Namespace) -> PipelineConfig:
    config = load_config(args.config)
    return apply_endpoint_override(config, os.environ.get(ENDPOINT_ENV))


def _add_config_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="path to the pipeline YAML config")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lesionforge", description="Lesion inpainting augmentation pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init-config", help="write a starter config file")
    p.add_argument("--out", required=True)
    p.add_argument("--preset", choices=["default", "desk"], default="default")

    p = sub.add_parser("make-toy-data", help="synthesize a small two-dataset corpus")
    _add_config_arg(p)
    p.add_argument("--positives", type=int, default=60, help="positive frames per dataset")
    p.add_argument("--negatives", type=int, default=40, help="negative frames per dataset")
    p.add_argument("--size", type=int, default=64, help="frame edge length in pixels")

    for name, help_text in (
        ("train-baseline", "stage-1 training of the downstream segmenter on real data"),
        ("generate", "inpaint lesions into negative backgrounds"),
        ("train-refiner", "train the region-gated pseudo-mask refiner"),
        ("refine-score", "refine pseudo-masks and score every synthetic sample"),
        ("select", "apply the selection policy to scored samples"),
        ("finetune", "stage-2 training on real + selected synthetic data"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_config_arg(p)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint, or combine stored reports")
    _add_config_arg(p)
    p.add_argument("--weights", help="checkpoint to evaluate (default: finetuned, else baseline)")
    p.add_argument(
        "--reports",
        nargs="+",
        metavar="NAME=REPORT.json",
        help="combine stored reports into one ablation-style table instead of evaluating",
    )

    p = sub.add_parser("build-review-sets", help="assemble blinded review sets from method runs")
    _add_config_arg(p)
    p.add_argument(
        "--run",
        action="append",
        required=True,
        metavar="METHOD=OUTPUT_DIR",
        help="a method name and the output dir of its pipeline run (repeatable)",
    )
    p.add_argument("--n-sets", type=int, required=True)
    p.add_argument(
        "--similarity",
        action="append",
        default=[],
        metavar="METHOD",
        help="methods rated for similarity to the reference (repeatable)",
    )
    p.add_argument("--out", required=True, help="where to write the plan JSON")

    p = sub.add_parser("serve-review", help="serve the rating API (and frontend if built)")
    _add_config_arg(p)
    p.add_argument("--plan", required=True, help="plan JSON from build-review-sets")
    p.add_argument("--store", required=True, help="append-only rankings JSONL path")
    p.add_argument("--static", help="directory with the built frontend")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def _cmd_init_config(args: argparse.Namespace) -> int:
    config = _desk_config() if args.preset == "desk" else PipelineConfig()
    save_config(config, args.out)
    print(f"wrote {args.preset} config to {args.out}")
    return 0


def _cmd_make_toy_data(args: argparse.Namespace) -> int:
    from .toydata import CorpusSpec, build_toy_corpus

    config = _load(args)
    root = Path(config.paths.data_root)
    root.mkdir(parents=True, exist_ok=True)
    specs = [
        CorpusSpec("siteA", args.positives, args.negatives, style=0, height=args.size, width=args.size),
        CorpusSpec("siteB", args.positives, args.negatives, style=1, height=args.size, width=args.size),
    ]
    manifest = build_toy_corpus(root, specs, seed=config.seed)
    save_manifest(manifest, config.paths.manifest)
    counts = manifest.split_counts()
    print(f"wrote {len(manifest.records)} records to {config.paths.manifest} (splits: {counts})")
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    from .pipeline import ablation_table, cmd_evaluate

    config = _load(args)
    if args.reports:
        rows = []
        for item in args.reports:
            name, _, path = item.partition("=")
            if not path:
                raise LesionForgeError(f"--reports items must look like NAME=REPORT.json, got {item!r}")
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
            rows.append((name, EvalReport.from_dict(payload)))
        print(ablation_table(rows))
        return 0
    report = cmd_evaluate(config, weights=args.weights)
    print(report.to_text())
    return 0


def _cmd_build_review_sets(args: argparse.Namespace) -> int:
    from .review import CandidateImage, build_review_sets, save_plan

    config = _load(args)
    base = load_manifest(config.paths.manifest)
    base_root = Path(config.paths.manifest).parent

    candidates = []
    for item in args.run:
        method, _, out_dir = item.partition("=")
        if not out_dir:
            raise LesionForgeError(f"--run items must look like METHOD=OUTPUT_DIR, got {item!r}")
        run_dir = Path(out_dir)
        manifest_path = run_dir / "refined.jsonl"
        if not manifest_path.exists():
            manifest_path = run_dir / "synthetic.jsonl"
        rows = load_manifest(manifest_path)
        for rec in rows.records:
            scores = (rec.provenance or {}).get("scores") or {}
            candidates.append(
                CandidateImage(
                    method=method,
                    condition_id=rec.provenance["condition_id"],
                    background_id=rec.provenance["background_id"],
                    image_path=str(run_dir / rec.image_path),
                    alignment=scores.get("alignment"),
                )
            )

    background_paths = {
        r.record_id: str(base_root / r.image_path) for r in base.records if r.kind == "real_negative"
    }
    reference_paths = {
        r.record_id: str(base_root / r.image_path) for r in base.records if r.kind == "real_positive"
    }
    methods = [item.partition("=")[0] for item in args.run]
    plan = build_review_sets(
        candidates,
        background_paths,
        reference_paths,
        methods=methods,
        similarity_methods=args.similarity,
        n_sets=args.n_sets,
        seed=config.seed,
    )
    save_plan(plan, args.out)
    print(f"wrote {len(plan.sets)} review sets to {args.out}")
    return 0


def _cmd_serve_review(args: argparse.Namespace) -> int:
    import uvicorn

    from .review import RankingStore, create_app, load_plan

    _load(args)  # validates the config even though serving only needs the plan
    plan = load_plan(args.plan)
    app = create_app(plan, RankingStore(args.store), static_dir=args.static)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = _build_parser().parse_args(argv)

    try:
        import torch

        torch.set_num_threads(max(1, os.cpu_count() or 1))
        if args.command == "init-config":
            return _cmd_init_config(args)
        if args.command == "make-toy-data":
            return _cmd_make_toy_data(args)
        if args.command == "evaluate":
            return _cmd_evaluate(args)
        if args.command == "build-review-sets":
            return _cmd_build_review_sets(args)
        if args.command == "serve-review":
            return _cmd_serve_review(args)

        from . import pipeline

        config = _load(args)
        stage = {
            "train-baseline": pipeline.cmd_train_baseline,
            "generate": pipeline.cmd_generate,
            "train-refiner": pipeline.cmd_train_refiner,
            "refine-score": pipeline.cmd_refine_and_score,
            "select": pipeline.cmd_select,
            "finetune": pipeline.cmd_finetune,
        }[args.command]
        artifact = stage(config)
        print(f"{args.command}: wrote {artifact}")
        return 0
    except BackendUnavailableError as exc:
        print(f"environment error: {exc}", file=sys.stderr)
        return 2
    except LesionForgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"environment error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
