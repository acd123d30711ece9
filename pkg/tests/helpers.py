"""Shared helpers for the test suite."""

import numpy as np

from lesionforge.imaging import BinaryMask


def rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def random_mask(r: np.random.Generator, h: int, w: int, p: float = 0.5) -> np.ndarray:
    return (r.random((h, w)) < p).astype(np.uint8)


def random_bmask(r: np.random.Generator, h: int, w: int, p: float = 0.5) -> BinaryMask:
    return BinaryMask(random_mask(r, h, w, p))
