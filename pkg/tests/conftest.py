import pytest
import torch

torch.set_num_threads(1)

from lesionforge.config import (
    EngineConfig,
    FinetuneConfig,
    PathsConfig,
    PipelineConfig,
    StageScheduleConfig,
)
from lesionforge.manifest import save_manifest
from lesionforge.refiner.model import RefinerConfig
from lesionforge.toydata import CorpusSpec, build_toy_corpus


@pytest.fixture(scope="session")
def desk_config(tmp_path_factory) -> PipelineConfig:
    """A small two-dataset corpus plus a config tuned for quick CPU runs."""
    root = tmp_path_factory.mktemp("desk")
    specs = [
        CorpusSpec("siteA", n_positive=18, n_negative=12, style=0),
        CorpusSpec("siteB", n_positive=18, n_negative=12, style=1),
    ]
    manifest = build_toy_corpus(root / "data", specs, seed=3)
    save_manifest(manifest, root / "data" / "manifest.jsonl")
    return PipelineConfig(
        paths=PathsConfig(
            data_root=str(root / "data"),
            manifest=str(root / "data" / "manifest.jsonl"),
            output_root=str(root / "out"),
        ),
        engine=EngineConfig(dilation_px=4, backgrounds_per_condition=2),
        refiner=RefinerConfig(input_size=64),
        baseline_schedule=StageScheduleConfig(epochs=4),
        refiner_schedule=StageScheduleConfig(epochs=4),
        finetune=FinetuneConfig(epochs=3, learning_rate=2e-4),
        seed=3,
    )


@pytest.fixture(scope="session")
def desk_run(desk_config) -> PipelineConfig:
    """The full pipeline executed once over the session corpus."""
    from lesionforge import pipeline

    pipeline.cmd_train_baseline(desk_config)
    pipeline.cmd_generate(desk_config)
    pipeline.cmd_train_refiner(desk_config)
    pipeline.cmd_refine_and_score(desk_config)
    pipeline.cmd_select(desk_config)
    pipeline.cmd_finetune(desk_config)
    pipeline.cmd_evaluate(desk_config)
    return desk_config
