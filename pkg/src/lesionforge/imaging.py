"""Pixel-level primitives: raster images, binary masks, and their geometry.

Coordinates are (row, col), zero-indexed, with pixel centers at integer
coordinates. Images hold float32 intensities in [0, 1]; masks hold uint8
values in {0, 1}. Both are immutable after construction (the wrapped numpy
buffers are marked non-writeable), so every operation here is a pure
function returning fresh values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from lesionforge.errors import BadFactorError, DimMismatchError, EmptyMaskError

# 8-bit mask files binarize at the conventional midpoint.
MASK_BINARIZE_THRESHOLD = 128


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class RasterImage:
    """Immutable H x W x C image with intensities in [0, 1], C in {1, 3}."""

    data: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise DimMismatchError(f"image must be HxWx1 or HxWx3, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimMismatchError(f"image dims must be >= 1, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("image intensities must be finite")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("image intensities must lie in [0, 1]")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.data.shape[0], self.data.shape[1])


@dataclass(frozen=True)
class BinaryMask:
    """Immutable H x W mask with values in {0, 1}."""

    data: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise DimMismatchError(f"mask must be HxW, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimMismatchError(f"mask dims must be >= 1, got shape {arr.shape}")
        if arr.dtype == bool:
            arr = arr.astype(np.uint8)
        else:
            arr = arr.astype(np.uint8, casting="unsafe")
            if not np.isin(arr, (0, 1)).all():
                raise ValueError("mask values must be exactly 0 or 1")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def foreground_count(self) -> int:
        return int(self.data.sum())

    def is_empty(self) -> bool:
        return not self.data.any()


def ensure_same_shape(*items: RasterImage | BinaryMask) -> None:
    shapes = {it.shape for it in items}
    if len(shapes) > 1:
        raise DimMismatchError(f"shape mismatch: {sorted(shapes)}")


def centroid(mask: BinaryMask) -> tuple[float, float]:
    """Arithmetic mean (row, col) of foreground pixel coordinates."""
    rows, cols = np.nonzero(mask.data)
    if rows.size == 0:
        raise EmptyMaskError("centroid of an empty mask")
    return float(rows.mean()), float(cols.mean())


def translate_mask(mask: BinaryMask, d_row: int, d_col: int) -> tuple[BinaryMask, int]:
    """Shift foreground by (d_row, d_col); content leaving the frame is dropped.

    Returns the shifted mask plus the number of clipped foreground pixels.
    """
    h, w = mask.shape
    out = np.zeros((h, w), dtype=np.uint8)
    src_r0 = max(0, -d_row)
    src_r1 = min(h, h - d_row)
    src_c0 = max(0, -d_col)
    src_c1 = min(w, w - d_col)
    if src_r0 < src_r1 and src_c0 < src_c1:
        out[src_r0 + d_row : src_r1 + d_row, src_c0 + d_col : src_c1 + d_col] = mask.data[
            src_r0:src_r1, src_c0:src_c1
        ]
    clipped = mask.foreground_count - int(out.sum())
    return BinaryMask(out), clipped


def downsample_mask(mask: BinaryMask, factor: int) -> BinaryMask:
    """Block-majority downsample; each factor x factor block votes, ties -> 1."""
    if factor < 1:
        raise BadFactorError(f"factor must be >= 1, got {factor}")
    h, w = mask.shape
    if h % factor or w % factor:
        raise BadFactorError(f"factor {factor} does not divide dims {h}x{w}")
    if factor == 1:
        return mask
    blocks = mask.data.reshape(h // factor, factor, w // factor, factor)
    counts = blocks.sum(axis=(1, 3), dtype=np.int64)
    # integer compare: fraction >= 0.5  <=>  2*count >= factor^2
    out = (2 * counts >= factor * factor).astype(np.uint8)
    return BinaryMask(out)


def bbox(mask: BinaryMask) -> tuple[int, int, int, int]:
    """Tight bounding box (r0, c0, r1, c1), end-exclusive."""
    rows, cols = np.nonzero(mask.data)
    if rows.size == 0:
        raise EmptyMaskError("bbox of an empty mask")
    return int(rows.min()), int(cols.min()), int(rows.max()) + 1, int(cols.max()) + 1


def crop_to_bbox(img: RasterImage, mask: BinaryMask, padding: int = 0) -> RasterImage:
    """Crop the image to the mask's bbox expanded by `padding`, clipped to bounds."""
    if img.shape != mask.shape:
        raise DimMismatchError(f"image {img.shape} vs mask {mask.shape}")
    r0, c0, r1, c1 = bbox(mask)
    r0 = max(0, r0 - padding)
    c0 = max(0, c0 - padding)
    r1 = min(img.height, r1 + padding)
    c1 = min(img.width, c1 + padding)
    return RasterImage(img.data[r0:r1, c0:c1, :])


def dilate_mask(mask: BinaryMask, radius: int) -> BinaryMask:
    """Euclidean disk dilation: pixels within `radius` of foreground turn on."""
    if radius <= 0:
        return mask
    if mask.is_empty():
        return mask
    dist = ndimage.distance_transform_edt(mask.data == 0)
    return BinaryMask(dist <= radius)


def inside_distance(mask: BinaryMask) -> np.ndarray:
    """Per-pixel Euclidean distance to the nearest background pixel (0 outside)."""
    return ndimage.distance_transform_edt(mask.data != 0)


def quantize_intensities(values: np.ndarray) -> np.ndarray:
    """Snap float intensities onto the 8-bit grid k/255 (round-half-up).

    Keeps synthesized pixels bit-stable through a PNG write/read cycle.
    """
    levels = np.floor(np.clip(values, 0.0, 1.0) * 255.0 + 0.5)
    return (levels / np.float32(255.0)).astype(np.float32)


def resize_image(img: RasterImage, out_h: int, out_w: int) -> RasterImage:
    """Bilinear resize (half-pixel centers, edges clamped)."""
    out = bilinear_resize_array(img.data.astype(np.float64), out_h, out_w)
    return RasterImage(np.clip(out, 0.0, 1.0).astype(np.float32))


def bilinear_resize_array(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    h, w = arr.shape[:2]
    ys = (np.arange(out_h, dtype=np.float64) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w, dtype=np.float64) + 0.5) * (w / out_w) - 0.5
    ys = np.clip(ys, 0.0, h - 1.0)
    xs = np.clip(xs, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    a = arr[y0][:, x0]
    b = arr[y0][:, x1]
    c = arr[y1][:, x0]
    d = arr[y1][:, x1]
    if arr.ndim == 2:
        fy = fy[:, :, 0]
        fx = fx[:, :, 0]
    top = a * (1.0 - fx) + b * fx
    bot = c * (1.0 - fx) + d * fx
    return top * (1.0 - fy) + bot * fy


def resize_mask_nearest(mask: BinaryMask, out_h: int, out_w: int) -> BinaryMask:
    """Nearest-neighbor mask resize (keeps values binary)."""
    h, w = mask.shape
    ys = np.minimum((np.arange(out_h, dtype=np.float64) + 0.5) * (h / out_h), h - 0.5).astype(np.int64)
    xs = np.minimum((np.arange(out_w, dtype=np.float64) + 0.5) * (w / out_w), w - 0.5).astype(np.int64)
    return BinaryMask(mask.data[ys][:, xs])


def load_image(path: str | Path) -> RasterImage:
    """Load an 8-bit PNG/JPEG and normalize intensities to [0, 1]."""
    with Image.open(path) as im:
        if im.mode in ("L", "I;16"):
            im = im.convert("L")
            arr = np.asarray(im, dtype=np.float32)[:, :, None]
        else:
            im = im.convert("RGB")
            arr = np.asarray(im, dtype=np.float32)
    return RasterImage(arr / np.float32(255.0))


def save_image(img: RasterImage, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = np.floor(img.data * 255.0 + 0.5).astype(np.uint8)
    if arr.shape[2] == 1:
        pil = Image.fromarray(arr[:, :, 0], mode="L")
    else:
        pil = Image.fromarray(arr, mode="RGB")
    pil.save(path)


def load_mask(path: str | Path) -> BinaryMask:
    """Load an 8-bit mask file; values >= 128 map to foreground."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    return BinaryMask(arr >= MASK_BINARIZE_THRESHOLD)


def save_mask(mask: BinaryMask, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(mask.data * np.uint8(255), mode="L").save(path)


def all_ones_mask(height: int, width: int) -> BinaryMask:
    return BinaryMask(np.ones((height, width), dtype=np.uint8))


def empty_mask(height: int, width: int) -> BinaryMask:
    return BinaryMask(np.zeros((height, width), dtype=np.uint8))
