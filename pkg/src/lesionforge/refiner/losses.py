"""Structure loss: boundary-weighted cross-entropy plus weighted soft-IoU."""

from __future__ import annotations

import torch
import torch.nn.functional as F


def structure_loss(logits: torch.Tensor, target: torch.Tensor, boundary_kernel: int = 31) -> torch.Tensor:
    """Pixel-weighted BCE + soft-IoU, weights emphasizing mask boundaries.

    weight = 1 + 5 * |avg_pool(target) - target|, the usual boundary-aware
    weighting for polyp-style segmentation training. Inputs are (B,1,H,W);
    target values in [0, 1].
    """
    pad = boundary_kernel // 2
    weit = 1.0 + 5.0 * torch.abs(
        F.avg_pool2d(target, kernel_size=boundary_kernel, stride=1, padding=pad) - target
    )
    wbce = F.binary_cross_entropy_with_logits(logits, target, reduction="none")
    wbce = (weit * wbce).sum(dim=(2, 3)) / weit.sum(dim=(2, 3))

    probs = torch.sigmoid(logits)
    inter = (probs * target * weit).sum(dim=(2, 3))
    union = ((probs + target) * weit).sum(dim=(2, 3))
    wiou = 1.0 - (inter + 1.0) / (union - inter + 1.0)
    return (wbce + wiou).mean()
