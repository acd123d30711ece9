"""Choose where to inpaint: color-matched patch search plus mask placement.

The candidate window is the region's tight bounding box re-centered on each
grid point; its cost is the Euclidean distance between mean colors (window
vs. the full reference crop) in an opponent color space. The opponent values
are quantized to the 1/65536 grid so window sums stay exact in float64: every
partial sum is an integer multiple of the grid step far below 2**53, so no
addition ever rounds and any summation order yields bit-identical costs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lesionforge.errors import DimMismatchError, EmptyMaskError, NoFeasiblePlacementError
from lesionforge.imaging import BinaryMask, RasterImage, bbox, centroid, translate_mask

_QUANT = 65536.0

# sRGB -> XYZ (D65) matrix and Lab constants.
_RGB2XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ],
    dtype=np.float64,
)
_WHITE = np.array([0.95047, 1.0, 1.08883], dtype=np.float64)
_LAB_DELTA = 6.0 / 29.0


def opponent_color(img: RasterImage) -> np.ndarray:
    """Per-pixel lightness + two chroma axes (CIE-style), quantized to 1/65536.

    Single-channel images are treated as gray (R = G = B).
    """
    rgb = img.data.astype(np.float64)
    if rgb.shape[2] == 1:
        rgb = np.repeat(rgb, 3, axis=2)
    linear = np.where(rgb <= 0.04045, rgb / 12.92, ((rgb + 0.055) / 1.055) ** 2.4)
    xyz = linear @ _RGB2XYZ.T
    t = xyz / _WHITE
    f = np.where(t > _LAB_DELTA**3, np.cbrt(t), t / (3.0 * _LAB_DELTA**2) + 4.0 / 29.0)
    lab = np.empty_like(xyz)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return np.round(lab * _QUANT) / _QUANT


def mean_opponent_color(img: RasterImage) -> np.ndarray:
    lab = opponent_color(img)
    h, w = lab.shape[:2]
    return lab.reshape(h * w, 3).sum(axis=0) / float(h * w)


@dataclass(frozen=True)
class PlacementResult:
    target_center: tuple[int, int]
    offset: tuple[int, int]
    moved_inpaint_region: BinaryMask
    moved_condition: BinaryMask
    similarity_cost: float


def _candidate_grid(
    background: RasterImage,
    region: BinaryMask,
    stride: int,
    exclusion: BinaryMask | None,
) -> tuple[np.ndarray, np.ndarray, int, int]:
    """Stride-grid centers whose re-centered bbox window fits in bounds and
    misses the exclusion mask entirely. Returns (rows, cols, bh, bw)."""
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if region.is_empty():
        raise EmptyMaskError("placement region is empty")
    h, w = background.shape
    r0, c0, r1, c1 = bbox(region)
    bh, bw = r1 - r0, c1 - c0
    if bh > h or bw > w:
        raise NoFeasiblePlacementError(f"region bbox {bh}x{bw} exceeds background {h}x{w}")
    r_lo, c_lo = (bh - 1) // 2, (bw - 1) // 2
    r_hi, c_hi = h - bh + r_lo, w - bw + c_lo
    rows = np.arange(r_lo, r_hi + 1, stride, dtype=np.int64)
    cols = np.arange(c_lo, c_hi + 1, stride, dtype=np.int64)
    if exclusion is not None:
        if exclusion.shape != background.shape:
            raise DimMismatchError(f"exclusion {exclusion.shape} vs background {background.shape}")
    return rows, cols, bh, bw


def _scan_costs(
    background: RasterImage,
    reference: RasterImage,
    region: BinaryMask,
    stride: int,
    exclusion: BinaryMask | None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All feasible centers with their costs: (rows, cols, costs) flattened."""
    rows, cols, bh, bw = _candidate_grid(background, region, stride, exclusion)
    lab = opponent_color(background)
    h, w = lab.shape[:2]
    integral = np.zeros((h + 1, w + 1, 3), dtype=np.float64)
    integral[1:, 1:, :] = lab.cumsum(axis=0).cumsum(axis=1)

    tops = rows - (bh - 1) // 2
    lefts = cols - (bw - 1) // 2
    sums = (
        integral[np.ix_(tops + bh, lefts + bw)]
        - integral[np.ix_(tops, lefts + bw)]
        - integral[np.ix_(tops + bh, lefts)]
        + integral[np.ix_(tops, lefts)]
    )
    means = sums / float(bh * bw)
    ref_mean = mean_opponent_color(reference)
    diff = means - ref_mean
    costs = np.sqrt(diff[..., 0] ** 2 + diff[..., 1] ** 2 + diff[..., 2] ** 2)

    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    rr, cc, costs = rr.ravel(), cc.ravel(), costs.ravel()
    if exclusion is not None:
        exc_int = np.zeros((h + 1, w + 1), dtype=np.int64)
        exc_int[1:, 1:] = exclusion.data.astype(np.int64).cumsum(axis=0).cumsum(axis=1)
        overlap = (
            exc_int[np.ix_(tops + bh, lefts + bw)]
            - exc_int[np.ix_(tops, lefts + bw)]
            - exc_int[np.ix_(tops + bh, lefts)]
            + exc_int[np.ix_(tops, lefts)]
        ).ravel()
        keep = overlap == 0
        rr, cc, costs = rr[keep], cc[keep], costs[keep]
    if rr.size == 0:
        raise NoFeasiblePlacementError("every candidate window overlaps the exclusion mask")
    return rr, cc, costs


def find_patch(
    background: RasterImage,
    reference: RasterImage,
    region: BinaryMask,
    stride: int = 8,
    exclusion: BinaryMask | None = None,
) -> tuple[tuple[int, int], float]:
    """Minimum-cost candidate center; ties broken by smallest (row, col)."""
    rr, cc, costs = _scan_costs(background, reference, region, stride, exclusion)
    order = np.lexsort((cc, rr, costs))
    best = order[0]
    return (int(rr[best]), int(cc[best])), float(costs[best])


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def place_conditions(
    background: RasterImage,
    inpaint_region: BinaryMask,
    condition: BinaryMask,
    reference: RasterImage,
    stride: int = 8,
    exclusion: BinaryMask | None = None,
) -> PlacementResult:
    """Move both masks by one integer offset so the inpaint region's centroid
    lands on the best candidate center; falls back to the next-best center
    whenever the move would clip either mask."""
    if inpaint_region.shape != background.shape or condition.shape != background.shape:
        raise DimMismatchError("masks must match the background dims")
    if condition.is_empty():
        raise EmptyMaskError("condition mask is empty")
    cr, cc_ = centroid(inpaint_region)
    rr, cc, costs = _scan_costs(background, reference, inpaint_region, stride, exclusion)
    order = np.lexsort((cc, rr, costs))
    for idx in order:
        target = (int(rr[idx]), int(cc[idx]))
        offset = (_round_half_up(target[0] - cr), _round_half_up(target[1] - cc_))
        moved_region, clipped_r = translate_mask(inpaint_region, *offset)
        moved_cond, clipped_c = translate_mask(condition, *offset)
        if clipped_r == 0 and clipped_c == 0:
            return PlacementResult(
                target_center=target,
                offset=offset,
                moved_inpaint_region=moved_region,
                moved_condition=moved_cond,
                similarity_cost=float(costs[idx]),
            )
    raise NoFeasiblePlacementError("all candidate centers clip the masks")
