"""Pipeline configuration: one YAML file drives every subcommand."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import yaml

from .errors import ConfigError
from .inpaint.core import VARIANTS
from .refiner.model import RefinerConfig
from .refiner.train import TrainingSchedule

MAX_FINETUNE_EPOCHS = 25


@dataclass(frozen=True)
class PathsConfig:
    data_root: str = "data"
    manifest: str = "data/manifest.jsonl"
    output_root: str = "out"


@dataclass(frozen=True)
class BackendConfig:
    name: str = "toy"
    variant: str = "toy"
    endpoint: str | None = None
    training_provenance: str = ""

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigError(f"backend.variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.name != "toy" and not self.endpoint:
            raise ConfigError(f"backend {self.name!r} is remote and needs an endpoint")


@dataclass(frozen=True)
class PlacementConfig:
    stride: int = 8
    use_placement: bool = True

    def __post_init__(self) -> None:
        if self.stride < 1:
            raise ConfigError(f"placement.stride must be >= 1, got {self.stride}")


@dataclass(frozen=True)
class EngineConfig:
    noise_strength: float = 0.85
    sampling_steps: int = 50
    dilation_px: int = 16
    backgrounds_per_condition: int = 2
    max_failure_rate: float = 0.05

    def __post_init__(self) -> None:
        if not (0.0 < self.noise_strength <= 1.0):
            raise ConfigError(f"engine.noise_strength must be in (0, 1], got {self.noise_strength}")
        if self.sampling_steps < 1:
            raise ConfigError(f"engine.sampling_steps must be >= 1, got {self.sampling_steps}")
        if self.dilation_px < 0:
            raise ConfigError(f"engine.dilation_px must be >= 0, got {self.dilation_px}")
        if self.backgrounds_per_condition < 1:
            raise ConfigError("engine.backgrounds_per_condition must be >= 1")
        if not (0.0 <= self.max_failure_rate < 1.0):
            raise ConfigError(f"engine.max_failure_rate must be in [0, 1), got {self.max_failure_rate}")


@dataclass(frozen=True)
class SelectionConfig:
    require_aligned: bool = True
    require_hard: bool = True
    align_threshold: float = 0.93
    confidence_threshold: float = 0.9
    per_dataset_cap: int | None = 200
    use_refined_labels: bool = True  # False trains on raw condition masks

    def __post_init__(self) -> None:
        for name in ("align_threshold", "confidence_threshold"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ConfigError(f"selection.{name} must be in [0, 1], got {v}")
        if self.per_dataset_cap is not None and self.per_dataset_cap < 1:
            raise ConfigError(f"selection.per_dataset_cap must be >= 1 or null, got {self.per_dataset_cap}")


@dataclass(frozen=True)
class FinetuneConfig:
    epochs: int = 25
    learning_rate: float = 1e-5
    batch_size: int = 8
    weight_decay: float = 0.0

    def __post_init__(self) -> None:
        if not (1 <= self.epochs <= MAX_FINETUNE_EPOCHS):
            raise ConfigError(f"finetune.epochs must be in [1, {MAX_FINETUNE_EPOCHS}], got {self.epochs}")
        if not (self.learning_rate > 0 and math.isfinite(self.learning_rate)):
            raise ConfigError(f"finetune.learning_rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigError(f"finetune.batch_size must be >= 1, got {self.batch_size}")
        if self.weight_decay < 0:
            raise ConfigError(f"finetune.weight_decay must be >= 0, got {self.weight_decay}")


@dataclass(frozen=True)
class StageScheduleConfig:
    """Schedule for the in-repo training stages (baseline and refiner)."""

    epochs: int = 8
    batch_size: int = 8
    learning_rate: float = 2e-3
    weight_decay: float = 1e-4

    def as_schedule(self, seed: int) -> TrainingSchedule:
        return TrainingSchedule(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            seed=seed,
        )

    def __post_init__(self) -> None:
        # delegate numeric validation to TrainingSchedule
        self.as_schedule(0)


@dataclass(frozen=True)
class PipelineConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    backend: BackendConfig = field(default_factory=BackendConfig)
    placement: PlacementConfig = field(default_factory=PlacementConfig)
    engine: EngineConfig = field(default_factory=EngineConfig)
    refiner: RefinerConfig = field(default_factory=RefinerConfig)
    refiner_schedule: StageScheduleConfig = field(default_factory=StageScheduleConfig)
    baseline_schedule: StageScheduleConfig = field(default_factory=StageScheduleConfig)
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    finetune: FinetuneConfig = field(default_factory=FinetuneConfig)
    eval_datasets: tuple[str, ...] = ()
    seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        object.__setattr__(self, "eval_datasets", tuple(self.eval_datasets))

    def to_dict(self) -> dict:
        data = asdict(self)
        data["eval_datasets"] = list(self.eval_datasets)
        data["refiner"]["feature_strides"] = list(self.refiner.feature_strides)
        return data

    def validate_paths(self) -> None:
        """Check the input paths exist; outputs are created on demand."""
        for label, p in (("paths.data_root", self.paths.data_root), ("paths.manifest", self.paths.manifest)):
            if not Path(p).exists():
                raise ConfigError(f"{label} does not exist: {p}")


_SECTIONS = {
    "paths": PathsConfig,
    "backend": BackendConfig,
    "placement": PlacementConfig,
    "engine": EngineConfig,
    "refiner": RefinerConfig,
    "refiner_schedule": StageScheduleConfig,
    "baseline_schedule": StageScheduleConfig,
    "selection": SelectionConfig,
    "finetune": FinetuneConfig,
}


def config_from_dict(data: dict) -> PipelineConfig:
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be a mapping, got {type(data).__name__}")
    kwargs: dict = {}
    for key, value in data.items():
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"section {key!r} must be a mapping")
            section_cls = _SECTIONS[key]
            try:
                kwargs[key] = section_cls(**value)
            except TypeError as exc:
                raise ConfigError(f"bad field in section {key!r}: {exc}") from None
        elif key in ("eval_datasets", "seed", "workers"):
            kwargs[key] = value
        else:
            raise ConfigError(f"unknown config key {key!r}")
    try:
        return PipelineConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"config is not valid YAML: {exc}") from None
    return config_from_dict(data or {})


def save_config(config: PipelineConfig, path: str | Path) -> None:
    """Serialize with all defaults materialized; load(save(c)) == c."""
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(config.to_dict(), fh, sort_keys=True, default_flow_style=False)


def apply_endpoint_override(config: PipelineConfig, endpoint: str | None) -> PipelineConfig:
    """Swap the backend endpoint (used for the env-var override)."""
    if not endpoint:
        return config
    return replace(config, backend=replace(config.backend, endpoint=endpoint))
