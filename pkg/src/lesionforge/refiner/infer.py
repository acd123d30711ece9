"""Pseudo-mask refinement: run the gated segmenter on one sample."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ..imaging import BinaryMask, RasterImage, bilinear_resize_array, ensure_same_shape, resize_image, resize_mask_nearest
from .model import RegionGatedSegmenter


@dataclass(frozen=True)
class RefinerOutput:
    probability_map: np.ndarray  # (H, W) float32 in [0, 1], original resolution
    refined_mask: BinaryMask


def image_to_tensor(img: RasterImage) -> torch.Tensor:
    arr = img.data
    if arr.shape[2] == 1:
        arr = np.repeat(arr, 3, axis=2)
    return torch.from_numpy(np.ascontiguousarray(arr.transpose(2, 0, 1)))[None]


def mask_to_tensor(mask: BinaryMask) -> torch.Tensor:
    return torch.from_numpy(mask.data.astype(np.float32))[None, None]


def refine(model: RegionGatedSegmenter, image: RasterImage, region: BinaryMask) -> RefinerOutput:
    """Predict a refined lesion mask inside the inpainted region.

    The image is resampled to the model's working resolution (bilinear for
    the image, nearest for the region mask), the probability map is upsampled
    back to the original size, and in multiply-gating mode it is re-masked by
    the full-resolution region so the output mask is a subset of the region.
    """
    ensure_same_shape(image, region)
    size = model.config.input_size
    net_image = image_to_tensor(resize_image(image, size, size))
    net_region = mask_to_tensor(resize_mask_nearest(region, size, size))

    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            probs = model.predict_probs(net_image, net_region)
    finally:
        if was_training:
            model.train()

    prob_small = probs[0, 0].numpy().astype(np.float32)
    prob_map = bilinear_resize_array(prob_small, image.height, image.width)
    prob_map = np.clip(prob_map, 0.0, 1.0).astype(np.float32)
    if model.config.gating_mode == "multiply":
        prob_map = prob_map * region.data.astype(np.float32)
    refined = (prob_map >= model.config.binarize_threshold).astype(np.uint8)
    return RefinerOutput(probability_map=prob_map, refined_mask=BinaryMask(refined))
