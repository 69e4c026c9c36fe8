"""Image carriers, lossless I/O, and semantically-closest pair construction.

Images are numpy float arrays of shape (H, W, C) with values in [0, 1],
C in {1, 3}. Every public operation clamps its result back into [0, 1].
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from PIL import Image

# ITU-R BT.601 luma weights, the single fixed grayscale convention.
GRAYSCALE_WEIGHTS = np.array([0.299, 0.587, 0.114], dtype=np.float64)

# Source index reserved for real images in every manifest.
REAL_SOURCE = 0


class ClassLabel(Enum):
    REAL = "real"
    FAKE = "fake"


class PairingKind(Enum):
    SOURCE_IMAGE = "source"
    NEAREST_NEIGHBOR = "nearest"


class ImageFormatError(ValueError):
    """Raised when a file cannot be decoded into a valid image tensor."""


def require_image(img, square=False):
    """Validate the (H, W, C) float [0,1] contract, returning the array."""
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] not in (1, 3):
        raise ValueError(f"expected HxWxC with C in {{1,3}}, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.floating):
        raise ValueError(f"expected float dtype, got {arr.dtype}")
    if not np.isfinite(arr).all():
        raise ValueError("image contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("pixel values outside [0, 1]")
    if square and arr.shape[0] != arr.shape[1]:
        raise ValueError(f"expected a square image, got {arr.shape[:2]}")
    return arr


def clamp01(img):
    return np.clip(img, 0.0, 1.0)


def load_image(path) -> np.ndarray:
    """Load a lossless raster file into an (H, W, C) float array in [0, 1]."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such image: {path}")
    try:
        with Image.open(path) as im:
            if im.mode in ("L", "I;16", "I"):
                im = im.convert("L")
                arr = np.asarray(im, dtype=np.float64)[..., None]
            else:
                im = im.convert("RGB")
                arr = np.asarray(im, dtype=np.float64)
    except Exception as exc:  # PIL raises a zoo of decode errors
        raise ImageFormatError(f"cannot decode {path}: {exc}") from exc
    arr = arr / 255.0
    if not np.isfinite(arr).all():
        raise ImageFormatError(f"non-finite decode result for {path}")
    return arr


def save_image(img, path) -> None:
    """Write an image as 8-bit lossless PNG; round-trips within 1/255."""
    arr = require_image(img)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    quant = np.round(arr * 255.0).astype(np.uint8)
    if arr.shape[2] == 1:
        im = Image.fromarray(quant[..., 0], mode="L")
    else:
        im = Image.fromarray(quant, mode="RGB")
    im.save(path, format="PNG")


def to_grayscale(img) -> np.ndarray:
    """Luminance combination with the fixed BT.601 weights; (H, W, 1) out."""
    arr = require_image(img)
    if arr.shape[2] == 1:
        return arr.copy()
    gray = arr @ GRAYSCALE_WEIGHTS
    return clamp01(gray)[..., None]


def bilinear_resize(img, out_h, out_w) -> np.ndarray:
    """Bilinear resize with half-pixel-center sampling.

    src coordinate of output pixel i is (i + 0.5) * scale - 0.5, clamped to
    the source grid; this is the common codec/library convention and is the
    reference for the crop-resize perturbation oracle.
    """
    arr = require_image(img)
    h, w, _ = arr.shape
    if (out_h, out_w) == (h, w):
        return arr.copy()

    def axis_coords(n_out, n_in):
        scale = n_in / n_out
        x = (np.arange(n_out) + 0.5) * scale - 0.5
        x = np.clip(x, 0.0, n_in - 1.0)
        lo = np.floor(x).astype(int)
        hi = np.minimum(lo + 1, n_in - 1)
        frac = x - lo
        return lo, hi, frac

    ylo, yhi, yf = axis_coords(out_h, h)
    xlo, xhi, xf = axis_coords(out_w, w)
    top = arr[ylo][:, xlo] * (1 - xf)[None, :, None] + arr[ylo][:, xhi] * xf[None, :, None]
    bot = arr[yhi][:, xlo] * (1 - xf)[None, :, None] + arr[yhi][:, xhi] * xf[None, :, None]
    out = top * (1 - yf)[:, None, None] + bot * yf[:, None, None]
    return clamp01(out)


def retrieval_feature(img, side=32):
    """Feature used for nearest-neighbor pairing: downsampled grayscale."""
    return bilinear_resize(to_grayscale(img), side, side).ravel()


def nearest_neighbor_pair(fake, real_set, feature_side=32) -> int:
    """Index of the closest real image under the declared retrieval metric.

    Euclidean distance on `feature_side`-square bilinear-downsampled
    grayscale; ties break to the lowest index.
    """
    reals = list(real_set)
    if not reals:
        raise ValueError("real_set is empty")
    target = retrieval_feature(fake, feature_side)
    feats = np.stack([retrieval_feature(r, feature_side) for r in reals])
    dists = np.linalg.norm(feats - target[None, :], axis=1)
    return int(np.argmin(dists))  # argmin already takes the first minimum


@dataclass
class LabeledImage:
    image: np.ndarray
    class_label: ClassLabel
    source_label: int
    path: str | None = None  # relative path once persisted

    def __post_init__(self):
        require_image(self.image)
        if self.source_label < 0:
            raise ValueError("source_label must be non-negative")
        if self.class_label is ClassLabel.REAL and self.source_label != REAL_SOURCE:
            raise ValueError("real images must carry the reserved real source index")


@dataclass
class SemanticPair:
    real: LabeledImage
    fake: LabeledImage
    pairing_kind: PairingKind
    partition: str = "train"  # train | val | eval

    def __post_init__(self):
        if self.real.class_label is not ClassLabel.REAL:
            raise ValueError("pair.real must be labeled real")
        if self.fake.class_label is not ClassLabel.FAKE:
            raise ValueError("pair.fake must be labeled fake")
        if self.real.image.shape != self.fake.image.shape:
            raise ValueError("pair members must share dimensions")


@dataclass
class DatasetManifest:
    pairs: list[SemanticPair] = field(default_factory=list)
    source_count: int = 2
    split: tuple[float, float, float] = (0.8, 0.1, 0.1)

    def __post_init__(self):
        if self.source_count < 2:
            raise ValueError("need at least the real source plus one fake source")
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise ValueError("split ratios must sum to 1")
        for p in self.pairs:
            if p.fake.source_label >= self.source_count:
                raise ValueError("pair source_label outside manifest source count")

    def partition(self, name) -> list[SemanticPair]:
        return [p for p in self.pairs if p.partition == name]

    def fake_sources(self) -> list[int]:
        return sorted({p.fake.source_label for p in self.pairs})


def assign_partitions(n, split):
    """Deterministic partition names for n pairs under (train, val, eval)."""
    n_train = int(round(n * split[0]))
    n_val = int(round(n * split[1]))
    names = ["train"] * n_train + ["val"] * n_val + ["eval"] * (n - n_train - n_val)
    return names[:n]


def build_pair_dataset(reals, fakes, kind_per_fake, source_refs=None,
                       split=(0.8, 0.1, 0.1)) -> DatasetManifest:
    """One SemanticPair per fake, SourceImage or NearestNeighbor kind.

    `reals` and `fakes` are LabeledImage sequences. For SourceImage kind the
    fake's entry in `source_refs` must index its pre-forgery original in
    `reals`; NearestNeighbor entries may be None.
    """
    fakes = list(fakes)
    reals = list(reals)
    kinds = list(kind_per_fake)
    if len(kinds) != len(fakes):
        raise ValueError("one pairing kind per fake required")
    refs = list(source_refs) if source_refs is not None else [None] * len(fakes)

    pairs = []
    parts = assign_partitions(len(fakes), split)
    real_images = [r.image for r in reals]
    for fake, kind, ref, part in zip(fakes, kinds, refs, parts):
        if kind is PairingKind.SOURCE_IMAGE:
            if ref is None:
                raise ValueError("SourceImage pairing requires a source reference")
            mate = reals[ref]
        else:
            if not reals:
                raise ValueError("nearest-neighbor pairing needs a non-empty real set")
            mate = reals[nearest_neighbor_pair(fake.image, real_images)]
        pairs.append(SemanticPair(real=mate, fake=fake, pairing_kind=kind, partition=part))

    n_sources = max([REAL_SOURCE + 1] + [f.source_label + 1 for f in fakes])
    return DatasetManifest(pairs=pairs, source_count=max(2, n_sources), split=split)


# --- manifest text format ------------------------------------------------
#
# Line-oriented, human readable:
#   tracelab-manifest v1
#   source_count <int>
#   split <train> <val> <eval>
#   pair kind=<source|nearest> part=<train|val|eval> src=<int> fake=<relpath> real=<relpath>

def save_manifest(manifest: DatasetManifest, directory, write_images=True) -> Path:
    """Persist manifest and (optionally) its images under `directory`."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = ["tracelab-manifest v1",
             f"source_count {manifest.source_count}",
             "split " + " ".join(f"{r:.6f}" for r in manifest.split)]
    for i, pair in enumerate(manifest.pairs):
        if pair.real.path is None:
            pair.real.path = f"reals/{i:06d}.png"
        if pair.fake.path is None:
            pair.fake.path = f"fakes/{i:06d}.png"
        if write_images:
            save_image(pair.real.image, directory / pair.real.path)
            save_image(pair.fake.image, directory / pair.fake.path)
        lines.append(
            f"pair kind={pair.pairing_kind.value} part={pair.partition} "
            f"src={pair.fake.source_label} fake={pair.fake.path} real={pair.real.path}"
        )
    out = directory / "manifest.txt"
    out.write_text("\n".join(lines) + "\n")
    return out


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    base = path.parent
    lines = [ln.strip() for ln in path.read_text().splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("tracelab-manifest"):
        raise ValueError(f"not a manifest file: {path}")
    source_count, split = 2, (0.8, 0.1, 0.1)
    pairs = []
    for ln in lines[1:]:
        key, _, rest = ln.partition(" ")
        if key == "source_count":
            source_count = int(rest)
        elif key == "split":
            split = tuple(float(x) for x in rest.split())
        elif key == "pair":
            fields = dict(tok.split("=", 1) for tok in rest.split())
            real = LabeledImage(load_image(base / fields["real"]), ClassLabel.REAL,
                                REAL_SOURCE, path=fields["real"])
            fake = LabeledImage(load_image(base / fields["fake"]), ClassLabel.FAKE,
                                int(fields["src"]), path=fields["fake"])
            kind = (PairingKind.SOURCE_IMAGE if fields["kind"] == "source"
                    else PairingKind.NEAREST_NEIGHBOR)
            pairs.append(SemanticPair(real, fake, kind, partition=fields["part"]))
        else:
            raise ValueError(f"unknown manifest line: {ln}")
    return DatasetManifest(pairs=pairs, source_count=source_count, split=split)
