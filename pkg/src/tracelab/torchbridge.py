"""numpy <-> torch plumbing and differentiable twins of the spectral ops.

The analytics modules (spectral, fingerprint) are the numerical reference;
each twin here is tested against them. Twins operate on NCHW batches.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F

from .fingerprint import SRM_KERNELS
from .imagecore import GRAYSCALE_WEIGHTS
from .spectral import FreqSplitConfig, gaussian_lowpass_mask, radial_bin_map

_GRAY_W = torch.tensor(GRAYSCALE_WEIGHTS, dtype=torch.float32).view(1, 3, 1, 1)

# forward-exact phase whose backward is damped near |F| = 0
PHASE_EPS = 1e-3


def set_determinism(seed):
    """Single-threaded, seeded torch state for reproducible runs."""
    torch.set_num_threads(1)
    torch.manual_seed(int(seed))


def to_tensor(images) -> torch.Tensor:
    """Stack HWC [0,1] numpy images into an NCHW float tensor."""
    arr = np.asarray(images, dtype=np.float32)
    if arr.ndim == 3:
        arr = arr[None]
    return torch.from_numpy(arr).permute(0, 3, 1, 2).contiguous()


def to_images(batch) -> np.ndarray:
    """NCHW tensor back to an (N, H, W, C) float array, clamped to [0,1]."""
    return batch.detach().clamp(0, 1).permute(0, 2, 3, 1).cpu().numpy().astype(np.float64)


def gray(batch) -> torch.Tensor:
    """Grayscale (N, H, W) of an NCHW batch (1 or 3 channels)."""
    if batch.shape[1] == 1:
        return batch[:, 0]
    return (batch * _GRAY_W.to(batch.dtype)).sum(dim=1)


def spectrum_channels(batch) -> torch.Tensor:
    """2-channel [log(1+amplitude), phase] spectrum input for the spectral
    discriminator, from the grayscale DFT.

    The phase equals angle(F) exactly; it is computed through atan2 on
    magnitude-normalized components so its backward stays bounded near
    zero-magnitude bins (angle's gradient is 1/|F| there).
    """
    spec = torch.fft.fft2(gray(batch))
    mag = spec.abs()
    re = spec.real / (mag + PHASE_EPS)
    im = spec.imag / (mag + PHASE_EPS)
    return torch.stack([torch.log1p(mag), torch.atan2(im, re)], dim=1)


class SrmLayer(torch.nn.Module):
    """Fixed (non-trainable) per-channel SRM filter bank, 3*C output maps."""

    def __init__(self, in_channels=3):
        super().__init__()
        weight = torch.zeros(3 * in_channels, in_channels, 5, 5)
        for c in range(in_channels):
            for k, kern in enumerate(SRM_KERNELS):
                weight[c * 3 + k, c] = torch.tensor(kern, dtype=torch.float32)
        self.register_buffer("weight", weight)
        self.in_channels = in_channels

    def forward(self, x):
        padded = F.pad(x, (2, 2, 2, 2), mode="reflect")
        return F.conv2d(padded, self.weight.to(x.dtype))


class FreqSplitter:
    """Differentiable twin of spectral.gaussian_split for NCHW batches."""

    def __init__(self, side, cfg: FreqSplitConfig):
        mask = gaussian_lowpass_mask(side, side, cfg.sigma)
        self.mask = torch.from_numpy(np.fft.ifftshift(mask).copy())
        self.cfg = cfg

    def __call__(self, batch):
        spec = torch.fft.fft2(batch)
        low = torch.fft.ifft2(spec * self.mask.to(batch.dtype)).real
        return low, batch - low


class RadialProfiler:
    """Differentiable twin of spectral.azimuthal_psd, per channel."""

    def __init__(self, side):
        bins = radial_bin_map(side)
        self.n_bins = side // 2 - 1
        keep = bins < self.n_bins
        self.mask = torch.from_numpy(keep)
        self.index = torch.from_numpy(bins[keep].astype(np.int64))
        self.side = side

    def __call__(self, batch):
        """(N, C, H, W) -> (N, C, n_bins) radial power sums."""
        spec = torch.fft.fftshift(torch.fft.fft2(batch), dim=(-2, -1))
        power = spec.real ** 2 + spec.imag ** 2
        flat = power[..., self.mask]
        out = torch.zeros(*flat.shape[:-1], self.n_bins, dtype=flat.dtype)
        out.index_add_(-1, self.index, flat)
        return out
