"""Noise-space analytics: adaptive Wiener denoising, noise residuals, model
fingerprints, normalized cross-correlation, and the fixed SRM filter bank."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate, uniform_filter

from . import arrayio
from .imagecore import clamp01, require_image

WIENER_WINDOW = 3

# Classic zero-sum SRM high-pass kernels with scale factors 1/4, 1/12, 1/2.
# Some printed variants carry a +4 center in the first kernel and a trailing
# +2 in the second; those are not zero-sum (they pass DC), which breaks the
# high-pass property the noise analysis depends on, so the standard forms
# are used. The non-zero-sum variant is kept below for reference only.
SRM_KERNELS = (
    np.array([[0, 0, 0, 0, 0],
              [0, -1, 2, -1, 0],
              [0, 2, -4, 2, 0],
              [0, -1, 2, -1, 0],
              [0, 0, 0, 0, 0]], dtype=np.float64) / 4.0,
    np.array([[-1, 2, -2, 2, -1],
              [2, -6, 8, -6, 2],
              [-2, 8, -12, 8, -2],
              [2, -6, 8, -6, 2],
              [-1, 2, -2, 2, -1]], dtype=np.float64) / 12.0,
    np.array([[0, 0, 0, 0, 0],
              [0, 0, 0, 0, 0],
              [0, 1, -2, 1, 0],
              [0, 0, 0, 0, 0],
              [0, 0, 0, 0, 0]], dtype=np.float64) / 2.0,
)

# Non-zero-sum printed variant (center +4, trailing +2); reference only.
SRM_KERNELS_PUBLISHED_VARIANT = (
    np.array([[0, 0, 0, 0, 0],
              [0, -1, 2, -1, 0],
              [0, 2, 4, 2, 0],
              [0, -1, 2, -1, 0],
              [0, 0, 0, 0, 0]], dtype=np.float64) / 4.0,
    np.array([[-1, 2, -2, 2, -1],
              [2, -6, 8, -6, 2],
              [-2, 8, -12, 8, 2],
              [2, -6, 8, -6, 2],
              [-1, 2, -2, 2, -1]], dtype=np.float64) / 12.0,
    SRM_KERNELS[2].copy(),
)


class DegenerateResidualError(ValueError):
    """A residual (or fingerprint) with zero norm; NCC is undefined."""


def wiener_denoise(img, window=WIENER_WINDOW) -> np.ndarray:
    """Local adaptive Wiener estimate, per channel.

    Local mean/variance over a `window`-square neighborhood (reflect
    boundary); the noise floor is the image-wide mean of local variances.
    Output is a convex combination of pixel and local mean, clamped to [0,1].
    """
    arr = require_image(img)
    out = np.empty_like(arr, dtype=np.float64)
    for c in range(arr.shape[2]):
        ch = arr[..., c].astype(np.float64)
        local_mean = uniform_filter(ch, size=window, mode="reflect")
        local_var = uniform_filter(ch * ch, size=window, mode="reflect") - local_mean ** 2
        local_var = np.maximum(local_var, 0.0)
        noise = local_var.mean()
        gain = np.where(local_var > noise,
                        (local_var - noise) / np.maximum(local_var, 1e-20), 0.0)
        out[..., c] = local_mean + gain * (ch - local_mean)
    return clamp01(out)


def noise_residual(img, window=WIENER_WINDOW) -> np.ndarray:
    """Signed image-minus-denoised residual; not clamped."""
    arr = require_image(img)
    return arr.astype(np.float64) - wiener_denoise(arr, window)


@dataclass
class Fingerprint:
    """Average noise residual over a model's outputs."""
    residual_map: np.ndarray
    sample_count: int

    def __post_init__(self):
        self.residual_map = np.asarray(self.residual_map, dtype=np.float64)
        if not np.isfinite(self.residual_map).all():
            raise ValueError("fingerprint contains non-finite values")
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")


def average_fingerprint(imgs, window=WIENER_WINDOW) -> Fingerprint:
    """Element-wise mean of noise residuals over a collection."""
    imgs = list(imgs)
    if not imgs:
        raise ValueError("average_fingerprint needs a non-empty collection")
    shape = np.asarray(imgs[0]).shape
    acc = np.zeros(shape, dtype=np.float64)
    for img in imgs:
        if np.asarray(img).shape != shape:
            raise ValueError("fingerprint inputs must share dimensions")
        acc += noise_residual(img, window)
    return Fingerprint(residual_map=acc / len(imgs), sample_count=len(imgs))


def ncc(fingerprint, residual) -> float:
    """Normalized cross-correlation <F, R> / (||F|| ||R||), in [-1, 1]."""
    f = np.asarray(fingerprint.residual_map if isinstance(fingerprint, Fingerprint)
                   else fingerprint, dtype=np.float64).ravel()
    r = np.asarray(residual, dtype=np.float64).ravel()
    if f.shape != r.shape:
        raise ValueError("fingerprint and residual shapes differ")
    nf, nr = np.linalg.norm(f), np.linalg.norm(r)
    if nf == 0.0 or nr == 0.0:
        raise DegenerateResidualError("zero-norm residual; constant image?")
    return float(np.clip(f @ r / (nf * nr), -1.0, 1.0))


def ncc_histogram(fingerprint, imgs, window=WIENER_WINDOW) -> list:
    """Per-image NCC of noise residuals against a fingerprint.

    Order-preserving; degenerate (zero-norm) items are recorded as None
    rather than silently dropped.
    """
    imgs = list(imgs)
    if not imgs:
        return []
    out = []
    for img in imgs:
        try:
            out.append(ncc(fingerprint, noise_residual(img, window)))
        except DegenerateResidualError:
            out.append(None)
    return out


def srm_filter(img) -> np.ndarray:
    """Cross-correlate each channel with the three SRM kernels.

    Same-size output via reflective padding; output channel 3*c + k holds
    kernel k applied to channel c.
    """
    arr = require_image(img)
    h, w, c = arr.shape
    out = np.empty((h, w, 3 * c), dtype=np.float64)
    for ci in range(c):
        for ki, kernel in enumerate(SRM_KERNELS):
            out[..., ci * 3 + ki] = correlate(arr[..., ci].astype(np.float64),
                                              kernel, mode="reflect")
    return out


def save_fingerprint(fp: Fingerprint, path, source="unknown") -> None:
    arrayio.save_array(fp.residual_map, path,
                       kind="fingerprint", sample_count=fp.sample_count,
                       source=source, normalization="mean residual, [0,1] pixel scale")


def load_fingerprint(path) -> Fingerprint:
    arr, meta = arrayio.load_array(path)
    return Fingerprint(residual_map=arr.astype(np.float64),
                       sample_count=int(meta.get("sample_count", 1)))
