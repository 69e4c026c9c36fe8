"""Defense-side perturbations: Gaussian blur, symmetric crop-resize, JPEG
round-trips, additive Gaussian noise, and the two augmentation policies
(weak empirical chain, strong adversarial substitution).

Every augmentation is reproducible from (input, spec, seed); the per-stage
decision log suffices to replay an augmentation bit-exactly.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace

import numpy as np
from PIL import Image

from .imagecore import ClassLabel, LabeledImage, bilinear_resize, clamp01, require_image


@dataclass
class PerturbSpec:
    blur_kernels: tuple = (3, 5, 7, 9)
    crop_pct_range: tuple = (5.0, 20.0)
    jpeg_quality_range: tuple = (10, 75)
    noise_var_range: tuple = (5.0, 20.0)  # variance on the 0-255 scale
    apply_prob: float = 0.5

    def __post_init__(self):
        if any(k < 3 or k % 2 == 0 for k in self.blur_kernels):
            raise ValueError("blur kernels must be odd and >= 3")
        for lo, hi in (self.crop_pct_range, self.jpeg_quality_range, self.noise_var_range):
            if hi < lo:
                raise ValueError("empty parameter range")
        if not 0.0 <= self.apply_prob <= 1.0:
            raise ValueError("apply_prob must be in [0, 1]")


class DefenseKind:
    NONE = "none"
    WEAK = "weak"
    STRONG = "strong"


@dataclass
class DefensePolicy:
    kind: str = DefenseKind.NONE
    spec: PerturbSpec = field(default_factory=PerturbSpec)
    # object with .apply(image) -> image; required for STRONG
    attack_model: object | None = None
    adv_prob: float = 0.5

    def __post_init__(self):
        if self.kind not in (DefenseKind.NONE, DefenseKind.WEAK, DefenseKind.STRONG):
            raise ValueError(f"unknown defense kind {self.kind!r}")


def blur_sigma(kernel_size) -> float:
    """Kernel-size-to-width rule: sigma = 0.3*((k-1)/2 - 1) + 0.8."""
    return 0.3 * ((kernel_size - 1) / 2.0 - 1.0) + 0.8


def gaussian_kernel_1d(kernel_size) -> np.ndarray:
    sigma = blur_sigma(kernel_size)
    x = np.arange(kernel_size) - (kernel_size - 1) / 2.0
    w = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    return w / w.sum()


def gaussian_blur(img, kernel_size) -> np.ndarray:
    """Separable Gaussian blur with reflect boundaries."""
    if kernel_size % 2 == 0 or kernel_size < 3:
        raise ValueError("kernel size must be odd and >= 3")
    arr = require_image(img)
    k = gaussian_kernel_1d(kernel_size)
    pad = kernel_size // 2
    out = np.pad(arr, ((pad, pad), (0, 0), (0, 0)), mode="reflect")
    out = sum(k[i] * out[i:i + arr.shape[0]] for i in range(kernel_size))
    out = np.pad(out, ((0, 0), (pad, pad), (0, 0)), mode="reflect")
    out = sum(k[i] * out[:, i:i + arr.shape[1]] for i in range(kernel_size))
    return clamp01(out)


def crop_resize(img, pct) -> np.ndarray:
    """Crop pct percent from every border, then bilinear-resize back."""
    if not 0.0 <= pct < 50.0:
        raise ValueError("crop percentage must be in [0, 50)")
    arr = require_image(img)
    h, w, _ = arr.shape
    dy = int(round(h * pct / 100.0))
    dx = int(round(w * pct / 100.0))
    if dy == 0 and dx == 0:
        return arr.copy()
    cropped = arr[dy:h - dy, dx:w - dx]
    return bilinear_resize(cropped, h, w)


def jpeg_compress(img, quality) -> np.ndarray:
    """Encode-decode through a standard JPEG codec (4:2:0 chroma for RGB)."""
    if not 1 <= quality <= 100:
        raise ValueError("quality must be in [1, 100]")
    arr = require_image(img)
    quant = np.round(arr * 255.0).astype(np.uint8)
    if arr.shape[2] == 1:
        im = Image.fromarray(quant[..., 0], mode="L")
    else:
        im = Image.fromarray(quant, mode="RGB")
    buf = io.BytesIO()
    im.save(buf, format="JPEG", quality=int(quality), subsampling=2)
    buf.seek(0)
    decoded = np.asarray(Image.open(buf), dtype=np.float64) / 255.0
    if decoded.ndim == 2:
        decoded = decoded[..., None]
    if decoded.shape != arr.shape:
        raise RuntimeError("JPEG round trip changed dimensions")
    return decoded


def add_gaussian_noise(img, variance_8bit, seed) -> np.ndarray:
    """Add N(0, variance) noise on the 0-255 scale, clamped; seeded."""
    if variance_8bit < 0:
        raise ValueError("variance must be >= 0")
    arr = require_image(img)
    if variance_8bit == 0:
        return arr.copy()
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, np.sqrt(variance_8bit) / 255.0, size=arr.shape)
    return clamp01(arr + noise)


# stage order is fixed: blurring, cropping, compression, noise
STAGES = ("blur", "crop", "jpeg", "noise")


@dataclass
class StageRecord:
    stage: str
    applied: bool
    param: float | None

    def as_line(self) -> str:
        param = "-" if self.param is None else f"{self.param:.6f}"
        return f"{self.stage} {int(self.applied)} {param}"

    @classmethod
    def from_line(cls, line) -> "StageRecord":
        stage, applied, param = line.split()
        return cls(stage=stage, applied=bool(int(applied)),
                   param=None if param == "-" else float(param))


def empirical_augment_logged(img, spec: PerturbSpec, seed):
    """Weak-defense chain with an explicit decision log.

    Each stage draws its own apply-coin with spec.apply_prob; parameters are
    sampled uniformly from the spec ranges. Returns (image, [StageRecord]).
    """
    arr = require_image(img)
    rng = np.random.default_rng(seed)
    log = []
    out = arr
    for stage in STAGES:
        if rng.random() >= spec.apply_prob:
            log.append(StageRecord(stage, False, None))
            continue
        if stage == "blur":
            k = int(rng.choice(spec.blur_kernels))
            out = gaussian_blur(out, k)
            log.append(StageRecord(stage, True, float(k)))
        elif stage == "crop":
            pct = float(rng.uniform(*spec.crop_pct_range))
            out = crop_resize(out, pct)
            log.append(StageRecord(stage, True, pct))
        elif stage == "jpeg":
            q = int(rng.integers(spec.jpeg_quality_range[0], spec.jpeg_quality_range[1] + 1))
            out = jpeg_compress(out, q)
            log.append(StageRecord(stage, True, float(q)))
        else:
            var = float(rng.uniform(*spec.noise_var_range))
            noise_seed = int(rng.integers(0, 2 ** 31 - 1))
            out = add_gaussian_noise(out, var, noise_seed)
            # log both the variance and the sub-seed so replay is bit-exact
            log.append(StageRecord(stage, True, var))
            log.append(StageRecord("noise_seed", True, float(noise_seed)))
    return out, log


def empirical_augment(img, spec: PerturbSpec, seed) -> np.ndarray:
    out, _ = empirical_augment_logged(img, spec, seed)
    return out


def replay_augment(img, log) -> np.ndarray:
    """Re-apply a logged augmentation chain bit-exactly."""
    out = require_image(img)
    records = list(log)
    i = 0
    while i < len(records):
        rec = records[i]
        i += 1
        if not rec.applied:
            continue
        if rec.stage == "blur":
            out = gaussian_blur(out, int(rec.param))
        elif rec.stage == "crop":
            out = crop_resize(out, rec.param)
        elif rec.stage == "jpeg":
            out = jpeg_compress(out, int(rec.param))
        elif rec.stage == "noise":
            seed_rec = records[i]
            i += 1
            out = add_gaussian_noise(out, rec.param, int(seed_rec.param))
    return out


def item_seed(seed, index) -> int:
    """Per-item derived seed for parallel-safe augmentation."""
    return (int(seed) ^ (index * 0x9E3779B1)) & 0x7FFFFFFF


def defended_batch(items, policy: DefensePolicy, seed):
    """Apply a defense policy to a batch of LabeledImages; labels unchanged.

    WeakEmpirical passes every image through the empirical chain with a
    per-item derived seed. StrongAdversarial replaces each fake image by the
    attack model's output with probability adv_prob.
    """
    items = list(items)
    if policy.kind == DefenseKind.NONE:
        return items
    if policy.kind == DefenseKind.WEAK:
        out = []
        for i, item in enumerate(items):
            img = empirical_augment(item.image, policy.spec, item_seed(seed, i))
            out.append(replace(item, image=img))
        return out
    # strong
    if policy.attack_model is None:
        raise ValueError("strong defense requires an attack model")
    rng = np.random.default_rng(seed)
    out = []
    for item in items:
        if item.class_label is ClassLabel.FAKE and rng.random() < policy.adv_prob:
            out.append(replace(item, image=policy.attack_model.apply(item.image)))
        else:
            out.append(item)
    return out
