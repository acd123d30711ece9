"""HTTP/JSON adapter to an external diffusion inference service.

Wire format: POST {endpoint}/inpaint with base64-encoded 8-bit PNG payloads
for images/masks plus sampler fields mirroring InpaintRequest; the response
carries the generated image the same way plus backend metadata. The adapter
retries transient failures (connection errors, 5xx) with a per-request
timeout; anything else surfaces as BackendUnavailableError.
"""

from __future__ import annotations

import base64
import io
import time

import numpy as np
import requests
from PIL import Image

from lesionforge.errors import BackendUnavailableError
from lesionforge.imaging import BinaryMask, RasterImage


def encode_image(img: RasterImage) -> str:
    arr = np.floor(img.data * 255.0 + 0.5).astype(np.uint8)
    pil = Image.fromarray(arr[:, :, 0], mode="L") if arr.shape[2] == 1 else Image.fromarray(arr, mode="RGB")
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def encode_mask(mask: BinaryMask) -> str:
    buf = io.BytesIO()
    Image.fromarray(mask.data * np.uint8(255), mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def decode_image(payload: str) -> RasterImage:
    raw = base64.b64decode(payload)
    with Image.open(io.BytesIO(raw)) as im:
        if im.mode == "L":
            arr = np.asarray(im, dtype=np.float32)[:, :, None]
        else:
            arr = np.asarray(im.convert("RGB"), dtype=np.float32)
    return RasterImage(arr / np.float32(255.0))


class RemoteBackendClient:
    """Client for the diffusion adapter endpoint."""

    def __init__(
        self,
        endpoint: str,
        timeout_s: float = 120.0,
        retries: int = 2,
        session: requests.Session | None = None,
    ) -> None:
        self.endpoint = endpoint.rstrip("/")
        self.timeout_s = timeout_s
        self.retries = retries
        self.session = session or requests.Session()

    def generate(self, request, backend) -> RasterImage:
        payload = {
            "background": encode_image(request.background),
            "inpaint_region": encode_mask(request.inpaint_region),
            "boundary_condition": encode_mask(request.boundary_condition),
            "surface_reference": (
                encode_image(request.surface_reference) if request.surface_reference is not None else None
            ),
            "noise_strength": request.noise_strength,
            "sampling_steps": request.sampling_steps,
            "seed": request.seed,
            "backend": {
                "name": backend.name,
                "variant": backend.variant,
                "training_provenance": backend.training_provenance,
            },
        }
        url = f"{self.endpoint}/inpaint"
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = self.session.post(url, json=payload, timeout=self.timeout_s)
            except requests.RequestException as exc:
                last_error = exc
            else:
                if resp.status_code == 200:
                    body = resp.json()
                    return decode_image(body["image"])
                if resp.status_code < 500:
                    raise BackendUnavailableError(
                        f"adapter rejected request: HTTP {resp.status_code} {resp.text[:200]}"
                    )
                last_error = BackendUnavailableError(f"adapter returned HTTP {resp.status_code}")
            if attempt < self.retries:
                time.sleep(min(0.25 * 2**attempt, 2.0))
        raise BackendUnavailableError(f"adapter unreachable after {self.retries + 1} attempts: {last_error}")
