"""Frequency-domain analytics: 2D-DFT, amplitude/phase, Gaussian frequency
splitting, azimuthal PSD profiles, DCT spectra, and averaged-spectrum maps.

Single-channel operations take 2D arrays (an (H, W, 1) image is squeezed).
DFT normalization: unnormalized forward, 1/(MN) inverse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import dctn, idctn

from .imagecore import clamp01, require_image, to_grayscale

IMAG_RESIDUE_TOL = 1e-5


def as_plane(img) -> np.ndarray:
    """Coerce a single-channel image (2D or HxWx1) to a 2D float array."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 3:
        if arr.shape[2] != 1:
            raise ValueError("expected a single-channel image")
        arr = arr[..., 0]
    if arr.ndim != 2:
        raise ValueError(f"expected a 2D plane, got shape {arr.shape}")
    return arr


def gray_plane(img) -> np.ndarray:
    """Grayscale 2D plane of any 1- or 3-channel image."""
    return as_plane(to_grayscale(img))


def dft2(img) -> np.ndarray:
    """Unnormalized forward 2D DFT of a single-channel image."""
    plane = as_plane(img)
    if not np.isfinite(plane).all():
        raise ValueError("non-finite input to dft2")
    return np.fft.fft2(plane)


def inverse_dft2(spec) -> np.ndarray:
    """Inverse 2D DFT; rejects spectra whose inverse is not real."""
    spec = np.asarray(spec, dtype=np.complex128)
    if not np.isfinite(spec.view(np.float64)).all():
        raise ValueError("non-finite input to inverse_dft2")
    out = np.fft.ifft2(spec)
    residue = float(np.abs(out.imag).max()) if out.size else 0.0
    scale = max(1.0, float(np.abs(out.real).max()))
    if residue > IMAG_RESIDUE_TOL * scale:
        raise ValueError(f"imaginary residue {residue:.3g} exceeds tolerance; corrupted spectrum")
    return out.real


@dataclass
class SpectrumPair:
    """Amplitude/phase decomposition of a complex spectrum."""
    amplitude: np.ndarray  # >= 0
    phase: np.ndarray      # in (-pi, pi]

    def to_complex(self) -> np.ndarray:
        return self.amplitude * np.exp(1j * self.phase)


def amp_phase(spec) -> SpectrumPair:
    """Decompose a complex spectrum into amplitude and four-quadrant phase."""
    spec = np.asarray(spec, dtype=np.complex128)
    return SpectrumPair(amplitude=np.abs(spec), phase=np.angle(spec))


@dataclass
class FreqSplitConfig:
    """Gaussian frequency-split filter width, in frequency-index units."""
    sigma: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    @classmethod
    def default_for(cls, side) -> "FreqSplitConfig":
        return cls(sigma=side / 16.0)


def gaussian_lowpass_mask(h, w, sigma) -> np.ndarray:
    """exp(-(u^2+v^2)/(2 sigma^2)) with (u, v) measured from the center of
    the shifted spectrum (DC at (h//2, w//2))."""
    v = np.arange(h) - h // 2
    u = np.arange(w) - w // 2
    r2 = v[:, None] ** 2 + u[None, :] ** 2
    return np.exp(-r2 / (2.0 * sigma ** 2))


def gaussian_split(img, cfg: FreqSplitConfig):
    """Split an image into (low, high) so low + high == img.

    The Gaussian filter is applied on the center-shifted spectrum of each
    channel; the high component uses the complementary filter 1 - H.
    """
    arr = require_image(img)
    h, w, c = arr.shape
    mask = np.fft.ifftshift(gaussian_lowpass_mask(h, w, cfg.sigma))
    low = np.empty_like(arr, dtype=np.float64)
    for ch in range(c):
        spec = np.fft.fft2(arr[..., ch])
        low[..., ch] = np.fft.ifft2(spec * mask).real
    high = arr - low
    return low, high


@dataclass
class PsdProfile:
    """Radial power profile; values[k] sums |F|^2 over pixels whose rounded
    distance from the spectrum center equals k, k in [0, M/2 - 1)."""
    values: np.ndarray

    @property
    def bin_count(self) -> int:
        return len(self.values)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if (self.values < 0).any() or not np.isfinite(self.values).all():
            raise ValueError("PSD values must be finite and non-negative")


def radial_bin_map(side) -> np.ndarray:
    """Nearest-integer radius of every pixel from the shifted-spectrum center."""
    v = np.arange(side) - side // 2
    r = np.hypot(v[:, None], v[None, :])
    return np.rint(r).astype(int)


def azimuthal_psd(img) -> PsdProfile:
    """Azimuthally integrated power spectrum of a square single-channel image."""
    plane = as_plane(img)
    m, n = plane.shape
    if m != n:
        raise ValueError("azimuthal_psd requires a square image")
    if m % 2 != 0:
        raise ValueError("azimuthal_psd requires an even side")
    power = np.abs(np.fft.fftshift(np.fft.fft2(plane))) ** 2
    bins = radial_bin_map(m)
    nb = m // 2 - 1
    values = np.bincount(bins[bins < nb].ravel(), weights=power[bins < nb].ravel(),
                         minlength=nb)
    return PsdProfile(values=values)


def dct2(img) -> np.ndarray:
    """Orthonormal type-II 2D DCT of a single-channel image."""
    return dctn(as_plane(img), type=2, norm="ortho")


def inverse_dct2(coeffs) -> np.ndarray:
    return idctn(np.asarray(coeffs, dtype=np.float64), type=2, norm="ortho")


def average_spectrum(imgs) -> np.ndarray:
    """Mean log(1 + amplitude) of the center-shifted spectra of a collection.

    3-channel inputs are converted to grayscale first.
    """
    imgs = list(imgs)
    if not imgs:
        raise ValueError("average_spectrum needs a non-empty collection")
    shape = np.asarray(imgs[0]).shape[:2]
    acc = np.zeros(shape, dtype=np.float64)
    for img in imgs:
        plane = gray_plane(img) if np.asarray(img).ndim == 3 else as_plane(img)
        if plane.shape != shape:
            raise ValueError("average_spectrum inputs must share dimensions")
        acc += np.log1p(np.abs(np.fft.fftshift(np.fft.fft2(plane))))
    return acc / len(imgs)


def spectrum_diff(a, b) -> np.ndarray:
    """Element-wise absolute difference of two spectrum maps."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return np.abs(a - b)
