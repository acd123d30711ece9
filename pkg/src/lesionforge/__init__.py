"""Lesion inpainting augmentation toolkit.

Generates synthetic lesion images by inpainting into negative backgrounds,
refines their pseudo-masks with a region-gated segmentation network, selects
well-aligned hard samples, and fine-tunes/evaluates a downstream segmenter.
"""

__version__ = "0.1.0"

from lesionforge.imaging import BinaryMask, RasterImage

__all__ = ["BinaryMask", "RasterImage", "__version__"]
