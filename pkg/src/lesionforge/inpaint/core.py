"""Backend-agnostic inpainting contract with enforced region confinement.

Whatever a backend returns, the engine composites generated pixels back onto
the background through the inpaint region, so content can only ever appear
where the region mask is set. Downstream mask refinement depends on that
guarantee.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lesionforge.errors import (
    BackendUnavailableError,
    DimMismatchError,
    EmptyMaskError,
    VariantMismatchError,
)
from lesionforge.imaging import BinaryMask, RasterImage, dilate_mask, empty_mask

VARIANTS = ("V1", "V2", "SD-baseline", "toy")

DEFAULT_NOISE_STRENGTH = 0.85
DEFAULT_SAMPLING_STEPS = 50


@dataclass(frozen=True)
class InpaintRequest:
    """One generation job: background, region to write, boundary condition,
    optional surface reference crop, and sampler knobs."""

    background: RasterImage
    inpaint_region: BinaryMask
    boundary_condition: BinaryMask
    surface_reference: RasterImage | None = None
    noise_strength: float = DEFAULT_NOISE_STRENGTH
    sampling_steps: int = DEFAULT_SAMPLING_STEPS
    seed: int = 0

    def __post_init__(self) -> None:
        if self.inpaint_region.shape != self.background.shape:
            raise DimMismatchError("inpaint_region dims must match background")
        if self.boundary_condition.shape != self.background.shape:
            raise DimMismatchError("boundary_condition dims must match background")
        if not (0.0 < self.noise_strength <= 1.0):
            raise ValueError(f"noise_strength must be in (0, 1], got {self.noise_strength}")
        if self.sampling_steps < 1:
            raise ValueError(f"sampling_steps must be >= 1, got {self.sampling_steps}")


@dataclass(frozen=True)
class BackendDescriptor:
    """Identity + conditioning variant of a generation backend.

    training_provenance is free-text bookkeeping (steps / learning rate /
    batch size) recorded into sample provenance for reproducibility.
    """

    name: str
    variant: str
    training_provenance: str = ""

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")


def _check_variant(request: InpaintRequest, backend: BackendDescriptor) -> None:
    has_surface = request.surface_reference is not None
    if has_surface != (backend.variant == "V2"):
        raise VariantMismatchError(
            f"surface_reference {'present' if has_surface else 'absent'} "
            f"but backend variant is {backend.variant}"
        )


def _confine(raw: RasterImage, request: InpaintRequest) -> RasterImage:
    """Composite raw output onto the background through the region mask."""
    bg = request.background.data
    if raw.shape != request.background.shape or raw.channels != request.background.channels:
        raise DimMismatchError("backend returned an image with mismatched dims")
    keep = request.inpaint_region.data.astype(bool)[:, :, None]
    return RasterImage(np.where(keep, raw.data, bg))


def inpaint(request: InpaintRequest, backend: BackendDescriptor, client=None) -> RasterImage:
    """Generate an image for the request through the named backend.

    The 'toy' backend runs in-process; any other name requires a remote
    client (see lesionforge.inpaint.remote). Pixels outside the inpaint
    region are bit-identical to the background in the returned image.
    """
    _check_variant(request, backend)
    if backend.name == "toy":
        from lesionforge.inpaint.toy import toy_compose

        raw = toy_compose(request)
    elif client is not None:
        raw = client.generate(request, backend)
    else:
        raise BackendUnavailableError(
            f"backend {backend.name!r} is remote but no client endpoint is configured"
        )
    return _confine(raw, request)


def remove_lesion(
    image: RasterImage,
    lesion_mask: BinaryMask,
    dilation: int,
    backend: BackendDescriptor,
    client=None,
) -> RasterImage:
    """Inpaint away a lesion: fill its dilated region with no boundary
    condition, producing a negative image."""
    if lesion_mask.shape != image.shape:
        raise DimMismatchError("lesion_mask dims must match image")
    if lesion_mask.is_empty():
        raise EmptyMaskError("remove_lesion needs a nonempty lesion mask")
    region = dilate_mask(lesion_mask, dilation)
    request = InpaintRequest(
        background=image,
        inpaint_region=region,
        boundary_condition=empty_mask(*image.shape),
    )
    return inpaint(request, backend, client=client)
