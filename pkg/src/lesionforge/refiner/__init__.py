from lesionforge.refiner.model import (
    RefinerConfig,
    RegionGate,
    RegionGatedSegmenter,
    build_model,
    downsample_region_tensor,
    multiply_gate,
    register_backbone,
)
from lesionforge.refiner.checkpoint import load_checkpoint, save_checkpoint
from lesionforge.refiner.infer import RefinerOutput, refine
from lesionforge.refiner.losses import structure_loss
from lesionforge.refiner.train import TrainingSchedule, TrainSample, train_refiner

__all__ = [
    "RefinerConfig",
    "RefinerOutput",
    "RegionGate",
    "RegionGatedSegmenter",
    "TrainSample",
    "TrainingSchedule",
    "build_model",
    "downsample_region_tensor",
    "load_checkpoint",
    "multiply_gate",
    "refine",
    "register_backbone",
    "save_checkpoint",
    "structure_loss",
    "train_refiner",
]
