"""Region-gated segmentation network.

A pyramid encoder yields features at the configured strides; each scale is
gated by the inpaint-region mask (element-wise multiply, or a learned
spatial-attention gate conditioned on the mask) before a light top-down
decoder predicts a full-resolution probability map. Gating suppresses
background clutter so the prediction can only come from inside the region
the generator was allowed to write.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import torch
import torch.nn.functional as F
from torch import nn

from lesionforge.errors import ConfigError, DimMismatchError

GATING_MODES = ("multiply", "spatial_attention")


@dataclass(frozen=True)
class RefinerConfig:
    gating_mode: str = "multiply"
    backbone: str = "toy_cnn"
    feature_strides: tuple[int, ...] = (4, 8, 16, 32)
    input_size: int = 352
    binarize_threshold: float = 0.5

    def __post_init__(self) -> None:
        if self.gating_mode not in GATING_MODES:
            raise ConfigError(f"gating_mode must be one of {GATING_MODES}, got {self.gating_mode!r}")
        strides = tuple(int(s) for s in self.feature_strides)
        object.__setattr__(self, "feature_strides", strides)
        if any(b <= a for a, b in zip(strides, strides[1:])):
            raise ConfigError(f"feature_strides must be strictly increasing, got {strides}")
        for s in strides:
            if s < 1 or self.input_size % s:
                raise ConfigError(f"stride {s} must divide input_size {self.input_size}")
        if not (0.0 < self.binarize_threshold < 1.0):
            raise ConfigError(f"binarize_threshold must be in (0, 1), got {self.binarize_threshold}")


def downsample_region_tensor(region: torch.Tensor, factor: int) -> torch.Tensor:
    """Block-majority downsample of a (B,1,H,W) binary tensor; ties -> 1.

    Uses integer-valued block sums so the tie at exactly half foreground is
    exact for any factor, matching the numpy mask path bit for bit.
    """
    if factor == 1:
        return region
    counts = F.avg_pool2d(region, kernel_size=factor, stride=factor, divisor_override=1)
    return (2.0 * counts >= float(factor * factor)).to(region.dtype)


def _check_feature_dims(
    features: Sequence[torch.Tensor], region: torch.Tensor, strides: Sequence[int]
) -> None:
    if len(features) != len(strides):
        raise DimMismatchError(f"{len(features)} feature scales vs {len(strides)} strides")
    size = region.shape[-1]
    if region.dim() != 4 or region.shape[1] != 1 or region.shape[-2] != size:
        raise DimMismatchError(f"region must be (B,1,S,S), got {tuple(region.shape)}")
    for feat, stride in zip(features, strides):
        expected = size // stride
        if feat.shape[-2:] != (expected, expected):
            raise DimMismatchError(
                f"feature at stride {stride} has spatial dims {tuple(feat.shape[-2:])}, expected {expected}"
            )


def multiply_gate(
    features: Sequence[torch.Tensor], region: torch.Tensor, strides: Sequence[int]
) -> list[torch.Tensor]:
    """gated[s] = features[s] * downsampled-region, broadcast over channels."""
    _check_feature_dims(features, region, strides)
    return [feat * downsample_region_tensor(region, s) for feat, s in zip(features, strides)]


class RegionGate(nn.Module):
    """Per-scale gating of encoder features by the inpaint-region mask."""

    def __init__(self, mode: str, n_scales: int) -> None:
        super().__init__()
        if mode not in GATING_MODES:
            raise ConfigError(f"unknown gating mode {mode!r}")
        self.mode = mode
        if mode == "spatial_attention":
            # channel-mean + channel-max + region mask -> 1x1 affine -> sigmoid
            self.attn = nn.ModuleList([nn.Conv2d(3, 1, kernel_size=1) for _ in range(n_scales)])

    def forward(
        self, features: Sequence[torch.Tensor], region: torch.Tensor, strides: Sequence[int]
    ) -> list[torch.Tensor]:
        if self.mode == "multiply":
            return multiply_gate(features, region, strides)
        _check_feature_dims(features, region, strides)
        gated = []
        for feat, stride, attn in zip(features, strides, self.attn):
            mask = downsample_region_tensor(region, stride)
            pooled = torch.cat([feat.mean(dim=1, keepdim=True), feat.amax(dim=1, keepdim=True), mask], dim=1)
            gate = torch.sigmoid(attn(pooled))
            gated.append(feat * gate)
        return gated


def _conv_block(c_in: int, c_out: int, stride: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(c_in, c_out, kernel_size=3, stride=stride, padding=1, bias=False),
        nn.GroupNorm(4, c_out),
        nn.ReLU(inplace=True),
    )


class ToyPyramidEncoder(nn.Module):
    """Small convolutional pyramid for CPU-scale runs.

    Satisfies the pyramid-encoder contract: `out_channels` lists per-scale
    widths and forward returns one feature map per configured stride.
    """

    def __init__(self, strides: Sequence[int], in_channels: int = 3) -> None:
        super().__init__()
        widths = [24, 40, 56, 72, 88, 104]
        if len(strides) > len(widths):
            raise ConfigError(f"toy encoder supports up to {len(widths)} scales")
        self.strides = tuple(strides)
        self.out_channels = widths[: len(strides)]
        stages = []
        prev_stride, prev_ch = 1, in_channels
        for stride, ch in zip(strides, self.out_channels):
            ratio = stride // prev_stride
            if ratio * prev_stride != stride or ratio & (ratio - 1):
                raise ConfigError(f"stride ladder must grow by powers of two, got {strides}")
            blocks = []
            while ratio > 1:
                blocks.append(_conv_block(prev_ch, ch, stride=2))
                prev_ch = ch
                ratio //= 2
            blocks.append(_conv_block(prev_ch, ch, stride=1))
            stages.append(nn.Sequential(*blocks))
            prev_stride, prev_ch = stride, ch
        self.stages = nn.ModuleList(stages)

    def forward(self, x: torch.Tensor) -> list[torch.Tensor]:
        feats = []
        for stage in self.stages:
            x = stage(x)
            feats.append(x)
        return feats


BackboneFactory = Callable[[Sequence[int]], nn.Module]
_BACKBONES: dict[str, BackboneFactory] = {"toy_cnn": ToyPyramidEncoder}


def register_backbone(name: str, factory: BackboneFactory) -> None:
    """Register a pyramid encoder under a config-selectable name.

    The factory takes the stride ladder and must return a module exposing
    `out_channels` and returning one feature map per stride.
    """
    _BACKBONES[name] = factory


class _Decoder(nn.Module):
    def __init__(self, in_channels: Sequence[int], width: int = 32) -> None:
        super().__init__()
        self.laterals = nn.ModuleList([nn.Conv2d(c, width, kernel_size=1) for c in in_channels])
        self.smooth = nn.ModuleList(
            [_conv_block(width, width, stride=1) for _ in range(len(in_channels) - 1)]
        )
        self.head = nn.Sequential(
            nn.Conv2d(width, width, kernel_size=3, padding=1, bias=False),
            nn.GroupNorm(4, width),
            nn.ReLU(inplace=True),
            nn.Conv2d(width, 1, kernel_size=1),
        )

    def forward(self, feats: Sequence[torch.Tensor]) -> torch.Tensor:
        x = self.laterals[-1](feats[-1])
        for idx in range(len(feats) - 2, -1, -1):
            up = F.interpolate(x, size=feats[idx].shape[-2:], mode="bilinear", align_corners=False)
            x = self.smooth[idx](up + self.laterals[idx](feats[idx]))
        return self.head(x)


class RegionGatedSegmenter(nn.Module):
    """Encoder -> region gating -> decoder; returns logits at input size."""

    def __init__(self, config: RefinerConfig) -> None:
        super().__init__()
        if config.backbone not in _BACKBONES:
            raise ConfigError(
                f"backbone {config.backbone!r} is not registered; known: {sorted(_BACKBONES)}"
            )
        self.config = config
        self.encoder = _BACKBONES[config.backbone](config.feature_strides)
        self.gate = RegionGate(config.gating_mode, len(config.feature_strides))
        self.decoder = _Decoder(self.encoder.out_channels)

    def forward(self, image: torch.Tensor, region: torch.Tensor) -> torch.Tensor:
        if image.shape[-2:] != region.shape[-2:]:
            raise DimMismatchError(f"image {tuple(image.shape)} vs region {tuple(region.shape)}")
        feats = self.encoder(image)
        gated = self.gate(feats, region, self.config.feature_strides)
        logits = self.decoder(gated)
        return F.interpolate(logits, size=image.shape[-2:], mode="bilinear", align_corners=False)

    def predict_probs(self, image: torch.Tensor, region: torch.Tensor) -> torch.Tensor:
        """Sigmoid probabilities; in multiply mode the map is additionally
        masked by the region so predictions cannot leak outside it."""
        probs = torch.sigmoid(self.forward(image, region))
        if self.config.gating_mode == "multiply":
            probs = probs * region
        return probs


def build_model(config: RefinerConfig, seed: int | None = None) -> RegionGatedSegmenter:
    if seed is not None:
        torch.manual_seed(seed)
    return RegionGatedSegmenter(config)
