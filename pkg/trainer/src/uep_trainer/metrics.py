"""Reconstruction quality metrics for [0, 1] image batches."""

from __future__ import annotations

import numpy as np
import torch
from skimage.metrics import structural_similarity


def psnr_batch(recon: torch.Tensor, target: torch.Tensor) -> float:
    """Mean per-image PSNR in dB against a peak value of 1.0."""
    mse = ((recon - target) ** 2).flatten(1).mean(1).clamp_min(1e-12)
    return float((10.0 * torch.log10(1.0 / mse)).mean())


def ssim_batch(recon: torch.Tensor, target: torch.Tensor) -> float:
    """Mean per-image structural similarity; multichannel images supported."""
    a = recon.clamp(0.0, 1.0).detach().cpu().numpy()
    b = target.detach().cpu().numpy()
    vals = []
    for i in range(a.shape[0]):
        x, y = a[i], b[i]
        if x.shape[0] == 1:
            vals.append(structural_similarity(x[0], y[0], data_range=1.0))
        else:
            vals.append(
                structural_similarity(
                    np.moveaxis(x, 0, -1), np.moveaxis(y, 0, -1),
                    data_range=1.0, channel_axis=-1,
                )
            )
    return float(np.mean(vals))
