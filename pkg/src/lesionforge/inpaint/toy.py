"""Deterministic toy compositor standing in for the diffusion backend.

Not a generative model: it diffuses border colors into the inpaint region,
then renders lesion content inside the boundary condition (a resampled
surface reference when given, otherwise a seeded procedural texture) with a
3 px feathered edge. All arithmetic is fixed-order float64 and the region's
pixels are snapped to the 8-bit grid, so outputs are bit-stable across runs
and survive a PNG round trip unchanged.
"""

from __future__ import annotations

import numpy as np

from lesionforge.imaging import (
    BinaryMask,
    RasterImage,
    bbox,
    bilinear_resize_array,
    inside_distance,
    quantize_intensities,
)

FEATHER_PX = 3.0
_FILL_ITERS = 96

# reddish lesion palette endpoints, interpolated by a seed hash
_PALETTE_LO = np.array([0.55, 0.22, 0.20], dtype=np.float64)
_PALETTE_HI = np.array([0.82, 0.44, 0.34], dtype=np.float64)


def _hash_u64(x: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer; wrapping uint64 arithmetic, platform-stable."""
    with np.errstate(over="ignore"):
        x = x.astype(np.uint64)
        x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return x ^ (x >> np.uint64(31))


def _hash01(seed: int, *coords: np.ndarray | int) -> np.ndarray:
    acc = np.asarray(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
    with np.errstate(over="ignore"):
        for c in coords:
            acc = _hash_u64(acc ^ (np.asarray(c, dtype=np.int64).astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15)))
    return (acc >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def _border_fill(bg: np.ndarray, region: BinaryMask) -> np.ndarray:
    """Diffuse colors from the region's border ring inward (Jacobi passes)."""
    h, w, c = bg.shape
    m = region.data.astype(bool)
    r0, c0, r1, c1 = bbox(region)
    r0, c0 = max(0, r0 - 1), max(0, c0 - 1)
    r1, c1 = min(h, r1 + 1), min(w, c1 + 1)
    win = bg[r0:r1, c0:c1].copy()
    mwin = m[r0:r1, c0:c1]

    ring = np.zeros_like(mwin)
    ring[:-1, :] |= mwin[1:, :]
    ring[1:, :] |= mwin[:-1, :]
    ring[:, :-1] |= mwin[:, 1:]
    ring[:, 1:] |= mwin[:, :-1]
    ring &= ~mwin
    if ring.any():
        seed_color = win[ring].reshape(-1, c).sum(axis=0) / float(ring.sum())
    else:
        seed_color = bg.reshape(-1, c).sum(axis=0) / float(h * w)
    win[mwin] = seed_color

    pad = np.zeros((win.shape[0] + 2, win.shape[1] + 2, c), dtype=np.float64)
    for _ in range(_FILL_ITERS):
        pad[1:-1, 1:-1] = win
        pad[0, 1:-1] = win[0]
        pad[-1, 1:-1] = win[-1]
        pad[1:-1, 0] = win[:, 0]
        pad[1:-1, -1] = win[:, -1]
        avg = (pad[:-2, 1:-1] + pad[2:, 1:-1] + pad[1:-1, :-2] + pad[1:-1, 2:]) * 0.25
        win[mwin] = avg[mwin]

    out = bg.copy()
    out[r0:r1, c0:c1][mwin] = win[mwin]
    return out


def _procedural_lesion(shape: tuple[int, int], channels: int, dist: np.ndarray, seed: int, noise_strength: float) -> np.ndarray:
    """Seeded lesion texture: reddish base, dome shading, fine hash noise."""
    u = float(_hash01(seed, 0x5EED))
    base = _PALETTE_LO + (_PALETTE_HI - _PALETTE_LO) * u
    dmax = dist.max()
    dome = 0.62 + 0.55 * np.sqrt(dist / dmax if dmax > 0 else dist)
    rr, cc = np.meshgrid(np.arange(shape[0]), np.arange(shape[1]), indexing="ij")
    noise = (_hash01(seed, rr, cc) - 0.5) * (0.10 * noise_strength)
    tex = dome * (1.0 + noise)
    if channels == 1:
        lum = float(base @ np.array([0.299, 0.587, 0.114]))
        out = lum * tex[:, :, None]
    else:
        out = base[None, None, :] * tex[:, :, None]
    return np.clip(out, 0.0, 1.0)


def _match_channels(arr: np.ndarray, channels: int) -> np.ndarray:
    if arr.shape[2] == channels:
        return arr
    if arr.shape[2] == 1:
        return np.repeat(arr, channels, axis=2)
    return arr @ np.array([0.299, 0.587, 0.114], dtype=np.float64)[:, None]


def toy_compose(request) -> RasterImage:
    """Deterministic reference compositor for an inpaint request."""
    bg = request.background.data.astype(np.float64)
    region = request.inpaint_region
    cond = request.boundary_condition
    channels = bg.shape[2]

    if region.is_empty():
        return request.background

    out = _border_fill(bg, region)

    if not cond.is_empty():
        r0, c0, r1, c1 = bbox(cond)
        ch, cw = r1 - r0, c1 - c0
        dist_full = inside_distance(cond)
        dist = dist_full[r0:r1, c0:c1]
        if request.surface_reference is not None:
            ref = request.surface_reference.data.astype(np.float64)
            lesion = bilinear_resize_array(ref, ch, cw)
            lesion = _match_channels(lesion, channels)
        else:
            lesion = _procedural_lesion((ch, cw), channels, dist, request.seed, request.noise_strength)
        alpha = np.minimum(dist / FEATHER_PX, 1.0)[:, :, None]
        mwin = cond.data[r0:r1, c0:c1].astype(bool)
        blended = alpha * lesion + (1.0 - alpha) * out[r0:r1, c0:c1]
        out[r0:r1, c0:c1][mwin] = blended[mwin]

    # snap synthesized pixels to the 8-bit grid; untouched pixels stay bit-exact
    region_mask = region.data.astype(bool)
    quant = quantize_intensities(out)
    result = request.background.data.copy()
    result[region_mask] = quant[region_mask]
    return RasterImage(result)
