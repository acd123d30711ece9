"""Synthetic endoscopy-like corpus for tests and CPU-scale pipeline runs.

Backgrounds are seeded value-noise textures in mucosa-like palettes (one
palette per dataset style, so two datasets exhibit a visible domain gap);
positives composite a procedural lesion over a background with the toy
generator, keeping the exact lesion mask as ground truth. Everything is
deterministic in the seed and quantized to 8-bit so PNG round-trips are
lossless.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .imaging import (
    BinaryMask,
    RasterImage,
    bilinear_resize_array,
    dilate_mask,
    quantize_intensities,
    save_image,
    save_mask,
)
from .inpaint.core import InpaintRequest
from .inpaint.planning import derive_seed
from .inpaint.toy import toy_compose
from .manifest import DatasetManifest, ManifestRecord, split_dataset

# (base RGB, noise tint RGB) per style; both read as mucosa but differ enough
# for a model to notice the domain gap between datasets
_STYLES = (
    ((0.78, 0.52, 0.50), (0.10, 0.06, 0.05)),
    ((0.70, 0.47, 0.36), (0.06, 0.09, 0.07)),
)


def value_noise(height: int, width: int, seed: int, cell: int = 8) -> np.ndarray:
    """Smooth lattice noise in [0, 1], bilinearly upsampled from a seeded grid."""
    if cell < 1:
        raise ConfigError(f"cell must be >= 1, got {cell}")
    rng = np.random.default_rng(seed)
    lattice = rng.random((max(2, height // cell + 1), max(2, width // cell + 1)))
    return bilinear_resize_array(lattice.astype(np.float32), height, width)


def make_background(height: int, width: int, seed: int, style: int = 0) -> RasterImage:
    """Textured negative frame: base palette + low/high frequency noise."""
    base, tint = _STYLES[style % len(_STYLES)]
    coarse = value_noise(height, width, derive_seed(seed, "coarse"), cell=max(4, height // 6))
    fine = value_noise(height, width, derive_seed(seed, "fine"), cell=max(2, height // 24))
    lum = 0.16 * (coarse - 0.5) + 0.06 * (fine - 0.5)
    rgb = np.empty((height, width, 3), dtype=np.float64)
    for ch in range(3):
        rgb[:, :, ch] = base[ch] + lum + tint[ch] * (fine - 0.5)
    rgb = np.clip(rgb, 0.02, 0.98)
    return RasterImage(quantize_intensities(rgb).astype(np.float32))


def make_lesion_mask(
    height: int,
    width: int,
    seed: int,
    min_frac: float = 0.05,
    max_frac: float = 0.16,
) -> BinaryMask:
    """Random rotated ellipse covering min_frac..max_frac of the frame."""
    if not (0.0 < min_frac <= max_frac < 1.0):
        raise ConfigError(f"bad area fractions ({min_frac}, {max_frac})")
    rng = np.random.default_rng(seed)
    area = rng.uniform(min_frac, max_frac) * height * width
    aspect = rng.uniform(0.55, 1.0)
    # area = pi*a*b with b = aspect*a
    a = float(np.sqrt(area / (np.pi * aspect)))
    b = aspect * a
    cy = rng.uniform(0.3, 0.7) * height
    cx = rng.uniform(0.3, 0.7) * width
    theta = rng.uniform(0.0, np.pi)
    yy, xx = np.mgrid[0:height, 0:width]
    dy, dx = yy - cy, xx - cx
    u = dx * np.cos(theta) + dy * np.sin(theta)
    v = -dx * np.sin(theta) + dy * np.cos(theta)
    mask = ((u / a) ** 2 + (v / b) ** 2 <= 1.0).astype(np.uint8)
    if not mask.any():
        mask[int(cy) % height, int(cx) % width] = 1
    return BinaryMask(mask)


def make_positive(
    height: int, width: int, seed: int, style: int = 0, halo_px: int = 3
) -> tuple[RasterImage, BinaryMask]:
    """A frame with one composited lesion and its exact ground-truth mask."""
    bg = make_background(height, width, derive_seed(seed, "bg"), style)
    gt = make_lesion_mask(height, width, derive_seed(seed, "mask"))
    halo = dilate_mask(gt, halo_px)
    request = InpaintRequest(
        background=bg,
        inpaint_region=halo,
        boundary_condition=gt,
        seed=derive_seed(seed, "paint"),
    )
    return toy_compose(request), gt


@dataclass(frozen=True)
class CorpusSpec:
    dataset_id: str
    n_positive: int
    n_negative: int
    style: int = 0
    height: int = 64
    width: int = 64


def build_toy_corpus(
    root: str | Path,
    specs: list[CorpusSpec],
    seed: int = 0,
    split_ratios: tuple[float, float, float] = (0.6, 0.2, 0.2),
) -> DatasetManifest:
    """Write PNG corpora for each spec and return a split manifest.

    Layout per dataset: <root>/<dataset_id>/images/*.png and masks/*.png for
    positives. The manifest's paths are relative to `root`, which is where
    callers should save it.
    """
    root = Path(root)
    out: list[ManifestRecord] = []
    for spec in specs:
        records: list[ManifestRecord] = []
        img_dir = root / spec.dataset_id / "images"
        mask_dir = root / spec.dataset_id / "masks"
        img_dir.mkdir(parents=True, exist_ok=True)
        mask_dir.mkdir(parents=True, exist_ok=True)
        for i in range(spec.n_positive):
            rid = f"{spec.dataset_id}-pos-{i:04d}"
            img, gt = make_positive(
                spec.height, spec.width, derive_seed(seed, spec.dataset_id, "pos", i), spec.style
            )
            save_image(img, img_dir / f"{rid}.png")
            save_mask(gt, mask_dir / f"{rid}.png")
            records.append(
                ManifestRecord(
                    record_id=rid,
                    dataset_id=spec.dataset_id,
                    split="train",
                    kind="real_positive",
                    image_path=f"{spec.dataset_id}/images/{rid}.png",
                    mask_path=f"{spec.dataset_id}/masks/{rid}.png",
                )
            )
        for i in range(spec.n_negative):
            rid = f"{spec.dataset_id}-neg-{i:04d}"
            bg = make_background(
                spec.height, spec.width, derive_seed(seed, spec.dataset_id, "neg", i), spec.style
            )
            save_image(bg, img_dir / f"{rid}.png")
            records.append(
                ManifestRecord(
                    record_id=rid,
                    dataset_id=spec.dataset_id,
                    split="train",
                    kind="real_negative",
                    image_path=f"{spec.dataset_id}/images/{rid}.png",
                )
            )
        part = split_dataset(records, split_ratios, seed=derive_seed(seed, "split", spec.dataset_id))
        out.extend(part.records)
    return DatasetManifest(tuple(out))
