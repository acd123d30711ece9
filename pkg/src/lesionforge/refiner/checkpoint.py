"""Checkpoint serialization for the region-gated refiner."""

from __future__ import annotations

import os
import tempfile
from dataclasses import asdict
from pathlib import Path
from typing import Any

import torch

from ..errors import WeightsMissingError
from .model import RefinerConfig, RegionGatedSegmenter, build_model

CHECKPOINT_FORMAT_VERSION = 1


def save_checkpoint(
    path: str | Path,
    model: RegionGatedSegmenter,
    config: RefinerConfig,
    history: list[dict[str, Any]] | None = None,
    meta: dict[str, Any] | None = None,
) -> None:
    """Write a versioned checkpoint atomically (tmp file + rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": asdict(config),
        "state_dict": {k: v.cpu() for k, v in model.state_dict().items()},
        "history": list(history or []),
        "meta": dict(meta or {}),
    }
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            torch.save(payload, fh)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def load_checkpoint(path: str | Path) -> tuple[RegionGatedSegmenter, RefinerConfig, dict[str, Any]]:
    """Rebuild the model from a checkpoint.

    Returns (model in eval mode, config, extras) where extras carries the
    stored history and meta dictionaries.
    """
    path = Path(path)
    if not path.is_file():
        raise WeightsMissingError(f"checkpoint not found: {path}")
    payload = torch.load(path, map_location="cpu", weights_only=False)
    version = payload.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise WeightsMissingError(
            f"unsupported checkpoint format {version!r} (expected {CHECKPOINT_FORMAT_VERSION})"
        )
    config = RefinerConfig(**payload["config"])
    model = build_model(config)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    extras = {"history": payload.get("history", []), "meta": payload.get("meta", {})}
    return model, config, extras
