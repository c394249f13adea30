"""Patch-swap mixing of cover/stego pairs and the half-batch assembler.

BitMix swaps one rectangle between a cover C and its stego S:

    C_S = M*S + (1-M)*C        S_C = M*C + (1-M)*S

and labels C_S with the share of modified pixels that landed inside the box,
``lam = |{p in box : C[p] != S[p]}| / |{p : C[p] != S[p]}|``, and S_C with ``1 - lam``.
CutMix uses the same images but labels by box area; MixUp blends whole images.

Labels on ``MixedPair`` measure stego content (0 = clean cover, 1 = full stego).
``AugmentedBatch`` re-expresses them in the batch's label convention.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from bitmix.errors import BoxOutOfBounds, DimensionMismatch, EmptyBatch, LabelOutOfRange, ZeroDenominator
from bitmix.image_core import D4Transform
from bitmix.rng import as_generator, substream
from bitmix.stego_sim import StegoPair


class Method(enum.IntEnum):
    """Augmentation applied to a pair. Values are the on-disk method codes."""

    NONE = 0
    BITMIX = 1
    CUTMIX = 2
    MIXUP = 3

    @classmethod
    def parse(cls, name: str | Method) -> Method:
        if isinstance(name, Method):
            return name
        return cls[name.strip().upper()]


class PixelKind(enum.Enum):
    INTEGER8 = "u8"
    FLOAT32 = "f32"

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(np.uint8) if self is PixelKind.INTEGER8 else np.dtype("<f4")


@dataclass(frozen=True)
class BBox:
    """Integer rectangle: top-left (x, y), extent (w, h). Zero extent is allowed."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self) -> None:
        if min(self.x, self.y, self.w, self.h) < 0:
            raise BoxOutOfBounds(f"negative box field in {self}")

    @classmethod
    def empty(cls) -> BBox:
        return cls(0, 0, 0, 0)

    @property
    def area(self) -> int:
        return self.w * self.h

    def fits(self, width: int, height: int) -> bool:
        return self.x + self.w <= width and self.y + self.h <= height

    def check(self, width: int, height: int) -> None:
        if not self.fits(width, height):
            raise BoxOutOfBounds(f"{self} does not fit in {width}x{height}")

    @property
    def slices(self) -> tuple[slice, slice]:
        return slice(self.y, self.y + self.h), slice(self.x, self.x + self.w)

    def mask(self, width: int, height: int) -> np.ndarray:
        self.check(width, height)
        m = np.zeros((height, width), dtype=bool)
        m[self.slices] = True
        return m

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x, self.y, self.w, self.h)


def bbox_apply_d4(bbox: BBox, width: int, height: int, t: D4Transform) -> BBox:
    """Image of ``bbox`` under ``t`` in the transformed raster's coordinates."""
    if bbox.area == 0:
        return BBox.empty()
    m = t.apply_array(bbox.mask(width, height))
    rows = np.flatnonzero(m.any(axis=1))
    cols = np.flatnonzero(m.any(axis=0))
    return BBox(int(cols[0]), int(rows[0]), int(cols[-1] - cols[0] + 1), int(rows[-1] - rows[0] + 1))


def _stochastic_round(v: float, rng: np.random.Generator) -> int:
    """floor(v) or floor(v) + 1 with probabilities making the result unbiased; integers stay put."""
    base = math.floor(v)
    frac = v - base
    return int(base) + int(frac > 0.0 and rng.random() < frac)


def _check_gamma(gamma: float) -> None:
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")


def bbox_for_fraction(width: int, height: int, fraction: float, rng: np.random.Generator) -> BBox:
    """Box whose sides are ``sqrt(fraction)`` of the image sides, placed uniformly at random.

    Sides are rounded stochastically and independently, so E[w * h] == fraction * W * H exactly.
    """
    scale = math.sqrt(fraction)
    w = min(width, _stochastic_round(width * scale, rng))
    h = min(height, _stochastic_round(height * scale, rng))
    x = int(rng.integers(0, width - w + 1))
    y = int(rng.integers(0, height - h + 1))
    return BBox(x, y, w, h)


def sample_bbox(width: int, height: int, gamma: float, rng: np.random.Generator | int | None = None) -> BBox:
    """Draw an area fraction uniformly from (0, gamma) and place a box of that size uniformly."""
    _check_gamma(gamma)
    if width < 1 or height < 1:
        raise DimensionMismatch(f"bad image size {width}x{height}")
    rng = as_generator(rng)
    return bbox_for_fraction(width, height, rng.uniform(0.0, gamma), rng)


@dataclass(frozen=True, eq=False)
class MixedPair:
    image_cs: np.ndarray
    image_sc: np.ndarray
    label_cs: float
    label_sc: float
    bbox: BBox
    lam: float
    pixel_kind: PixelKind
    # exact numerator/denominator of lam for BitMix and CutMix
    lam_num: int | None = None
    lam_den: int | None = None

    @property
    def lam_exact(self) -> Fraction | None:
        if self.lam_num is None:
            return None
        return Fraction(self.lam_num, self.lam_den)


def _labels(lam: float) -> tuple[float, float]:
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise LabelOutOfRange(f"mixing ratio {lam} outside [0, 1]")
    return lam, 1.0 - lam


def swap_patch(cover: np.ndarray, stego: np.ndarray, bbox: BBox) -> tuple[np.ndarray, np.ndarray]:
    """Return (C_S, S_C): copies of cover and stego with the box contents exchanged."""
    cs = np.array(cover, copy=True)
    sc = np.array(stego, copy=True)
    sl = bbox.slices
    cs[sl] = stego[sl]
    sc[sl] = cover[sl]
    return cs, sc


def bitmix_pair(pair: StegoPair, bbox: BBox) -> MixedPair:
    """Swap ``bbox`` between cover and stego; label by the share of modified pixels inside it."""
    bbox.check(pair.width, pair.height)
    total = pair.n_modified
    if total == 0:
        raise ZeroDenominator("cover and stego are identical")
    in_box = int(np.count_nonzero(pair.modified[bbox.slices]))
    cs, sc = swap_patch(pair.cover.pixels, pair.stego.pixels, bbox)
    lam = in_box / total
    label_cs, label_sc = _labels(lam)
    return MixedPair(cs, sc, label_cs, label_sc, bbox, lam, PixelKind.INTEGER8, in_box, total)


def cutmix_labels(bbox: BBox, width: int, height: int) -> tuple[float, float]:
    """Area-proportional labels (C_S, S_C) for a swapped box."""
    bbox.check(width, height)
    return _labels(bbox.area / (width * height))


def cutmix_pair(pair: StegoPair, bbox: BBox) -> MixedPair:
    """Same images as :func:`bitmix_pair`, area-proportional labels."""
    label_cs, label_sc = cutmix_labels(bbox, pair.width, pair.height)
    cs, sc = swap_patch(pair.cover.pixels, pair.stego.pixels, bbox)
    return MixedPair(cs, sc, label_cs, label_sc, bbox, label_cs, PixelKind.INTEGER8, bbox.area, pair.width * pair.height)


def mixup_pair(pair: StegoPair, mix_coefficient: float) -> MixedPair:
    """Blend whole images in floating point; no quantization back to 8 bits."""
    label_cs, label_sc = _labels(mix_coefficient)
    c = pair.cover.pixels.astype(np.float64)
    s = pair.stego.pixels.astype(np.float64)
    cs = (label_cs * s + label_sc * c).astype(np.float32)
    sc = (label_cs * c + label_sc * s).astype(np.float32)
    return MixedPair(cs, sc, label_cs, label_sc, BBox.empty(), label_cs, PixelKind.FLOAT32)


# --- batches -------------------------------------------------------------


@dataclass(frozen=True)
class MixConfig:
    gamma: float = 0.25
    method: Method = Method.BITMIX
    apply_fraction: float = 0.5
    seed: int = 0
    # label given to a clean cover; 1 follows the mini-batch recipe, 0 the stego-positive convention
    cover_label: int = 1
    # fixed MixUp coefficient; None draws Unif(0, gamma) per pair
    mixup_coefficient: float | None = None

    def __post_init__(self) -> None:
        _check_gamma(self.gamma)
        if not 0.0 <= self.apply_fraction <= 1.0:
            raise ValueError(f"apply_fraction must lie in [0, 1], got {self.apply_fraction}")
        if self.cover_label not in (0, 1):
            raise ValueError("cover_label must be 0 or 1")
        if self.mixup_coefficient is not None and not 0.0 <= self.mixup_coefficient <= 1.0:
            raise ValueError("mixup_coefficient must lie in [0, 1]")
        object.__setattr__(self, "method", Method.parse(self.method))

    def n_augmented(self, n_pairs: int) -> int:
        # tolerance absorbs binary-fraction error, e.g. 0.3 * 10
        return min(n_pairs, math.floor(self.apply_fraction * n_pairs + 1e-9))


@dataclass(frozen=True)
class PairRecord:
    """Provenance of one pair in a batch. ``lam`` is the C_S mixing weight, stored at float32 precision."""

    transform: D4Transform
    method: Method
    bbox: BBox
    lam: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "transform", D4Transform(self.transform))
        object.__setattr__(self, "method", Method(self.method))
        object.__setattr__(self, "lam", float(np.float32(self.lam)))


@dataclass(frozen=True, eq=False)
class AugmentedBatch:
    """2N rasters: cover-side items at [0, N), stego-side at [N, 2N); pair i sits at (i, N + i)."""

    images: np.ndarray
    labels: np.ndarray
    provenance: tuple[PairRecord, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        images = np.asarray(self.images)
        labels = np.asarray(self.labels, dtype=np.float32)
        if images.ndim != 3 or images.shape[0] == 0 or images.shape[0] % 2:
            raise ValueError(f"images must be (2N, H, W) with N >= 1, got {images.shape}")
        if images.dtype not in (np.uint8, np.float32):
            raise ValueError(f"unsupported pixel dtype {images.dtype}")
        if labels.shape != (images.shape[0],):
            raise ValueError("one label per image required")
        if np.any(~((labels >= 0) & (labels <= 1))):
            raise LabelOutOfRange("labels must lie in [0, 1]")
        if len(self.provenance) * 2 != images.shape[0]:
            raise ValueError("one provenance record per pair required")
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "provenance", tuple(self.provenance))

    @property
    def n_pairs(self) -> int:
        return self.images.shape[0] // 2

    @property
    def width(self) -> int:
        return self.images.shape[2]

    @property
    def height(self) -> int:
        return self.images.shape[1]

    @property
    def pixel_kind(self) -> PixelKind:
        return PixelKind.INTEGER8 if self.images.dtype == np.uint8 else PixelKind.FLOAT32

    def pair_items(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        return self.images[i], self.images[self.n_pairs + i]

    def pair_labels(self, i: int) -> tuple[float, float]:
        return float(self.labels[i]), float(self.labels[self.n_pairs + i])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AugmentedBatch):
            return NotImplemented
        return (
            self.images.dtype == other.images.dtype
            and self.images.shape == other.images.shape
            and np.array_equal(self.images, other.images)
            and np.array_equal(self.labels, other.labels)
            and self.provenance == other.provenance
        )


def float32_complement(lam: float) -> tuple[np.float32, np.float32]:
    """(lam, 1 - lam) at float32 precision, summing to exactly 1 in float32."""
    a = np.float32(lam)
    return a, np.float32(1.0) - a


_SHAPE_PRESERVING = (D4Transform.IDENTITY, D4Transform.ROT180, D4Transform.FLIPH, D4Transform.FLIPH_ROT180)


def sample_d4(width: int, height: int, rng: np.random.Generator) -> D4Transform:
    """Uniform over all eight symmetries for square rasters, over the four shape-preserving ones otherwise."""
    if width == height:
        return D4Transform(int(rng.integers(8)))
    return _SHAPE_PRESERVING[int(rng.integers(4))]


def assemble_batch(
    pairs: Sequence[StegoPair],
    config: MixConfig,
    keys: Sequence[int] | None = None,
) -> AugmentedBatch:
    """Build one paired mini-batch.

    Each pair gets one random D4 symmetry applied to cover and stego alike. The first
    ``floor(apply_fraction * N)`` pairs are then mixed with ``config.method``; the rest keep
    hard labels. Pair order is taken as given, so shuffle upstream every epoch.

    Randomness for pair i comes from substreams keyed by ``(config.seed, keys[i])``
    (``keys`` defaults to ``range(N)``), so results do not depend on processing order.
    """
    n = len(pairs)
    if n == 0:
        raise EmptyBatch("no pairs to assemble")
    keys = range(n) if keys is None else keys
    if len(keys) != n:
        raise ValueError("one key per pair required")
    h, w = pairs[0].cover.shape
    for p in pairs:
        if p.cover.shape != (h, w):
            raise DimensionMismatch(f"batch mixes {w}x{h} with {p.width}x{p.height}")

    method = config.method
    kind = PixelKind.FLOAT32 if method is Method.MIXUP else PixelKind.INTEGER8
    images = np.empty((2 * n, h, w), dtype=kind.dtype)
    # stego content of each item: 0 for a clean cover, 1 for a full stego
    stegoness = np.zeros(2 * n, dtype=np.float32)
    stegoness[n:] = 1.0
    records = []
    n_aug = config.n_augmented(n) if method is not Method.NONE else 0
    seed = config.seed

    for i, (pair, key) in enumerate(zip(pairs, keys)):
        t = sample_d4(w, h, substream(seed, "transform", key))
        cov = t.apply_array(pair.cover.pixels)
        ste = t.apply_array(pair.stego.pixels)
        out_c, out_s = images[i], images[n + i]
        out_c[...] = cov
        out_s[...] = ste
        if i >= n_aug:
            records.append(PairRecord(t, Method.NONE, BBox.empty(), 0.0))
            continue

        rng = substream(seed, "box", key)
        th, tw = cov.shape
        if method is Method.MIXUP:
            coef = config.mixup_coefficient
            if coef is None:
                coef = rng.uniform(0.0, config.gamma)
            c64 = cov.astype(np.float64)
            s64 = ste.astype(np.float64)
            out_c[...] = coef * s64 + (1.0 - coef) * c64
            out_s[...] = coef * c64 + (1.0 - coef) * s64
            lam, bbox = float(coef), BBox.empty()
        else:
            bbox = sample_bbox(tw, th, config.gamma, rng)
            sl = bbox.slices
            out_c[sl] = ste[sl]
            out_s[sl] = cov[sl]
            if method is Method.BITMIX:
                modified = t.apply_array(pair.modified)
                lam = np.count_nonzero(modified[sl]) / pair.n_modified
            else:
                lam = bbox.area / (tw * th)
        stegoness[i], stegoness[n + i] = float32_complement(_labels(lam)[0])
        records.append(PairRecord(t, method, bbox, lam))

    if config.cover_label == 1:
        # complements are exact, so swapping the pair relabels without rounding
        labels = np.concatenate([stegoness[n:], stegoness[:n]])
    else:
        labels = stegoness
    return AugmentedBatch(images, labels, tuple(records))
