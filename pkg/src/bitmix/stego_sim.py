"""Synthetic cover/stego pairs from simulated +-1 embedding.

Real content-adaptive embedders are not implemented here. What matters for the
modified-pixel ratio is only *where* pixels changed, so two probability maps
are offered: uniform (every pixel equally likely) and adaptive (proportional
to local intensity variance, i.e. textured regions change, flat ones don't).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import ndimage, optimize

from bitmix.errors import DegenerateOutput, DimensionMismatch, FlatImage, OutOfRange, ZeroDenominator
from bitmix.image_core import GrayImage
from bitmix.rng import as_generator, substream

LOG2_3 = math.log2(3.0)


class Mode(enum.Enum):
    UNIFORM = "uniform"
    ADAPTIVE = "adaptive"


@dataclass(frozen=True)
class EmbedSpec:
    change_rate: float
    mode: Mode = Mode.UNIFORM
    adaptive_window: int = 3
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.change_rate < 1.0:
            raise OutOfRange(f"change_rate must lie in (0, 1), got {self.change_rate}")
        if self.adaptive_window < 3 or self.adaptive_window % 2 == 0:
            raise OutOfRange(f"adaptive_window must be odd and >= 3, got {self.adaptive_window}")
        object.__setattr__(self, "mode", Mode(self.mode))


@dataclass(frozen=True, eq=False)
class StegoPair:
    """A cover and its stego. Same dimensions, at least one differing pixel."""

    cover: GrayImage
    stego: GrayImage

    def __post_init__(self) -> None:
        if self.cover.shape != self.stego.shape:
            raise DimensionMismatch(f"cover {self.cover!r} vs stego {self.stego!r}")
        if not self.modified.any():
            raise ZeroDenominator("stego is identical to its cover")

    @cached_property
    def modified(self) -> np.ndarray:
        m = self.cover.pixels != self.stego.pixels
        m.setflags(write=False)
        return m

    @cached_property
    def n_modified(self) -> int:
        return int(np.count_nonzero(self.modified))

    @cached_property
    def integral(self) -> np.ndarray:
        """Summed-area table of ``modified`` with a zero top row/left column, shape (H+1, W+1)."""
        s = np.zeros((self.height + 1, self.width + 1), dtype=np.int64)
        np.cumsum(np.cumsum(self.modified, axis=0, dtype=np.int64), axis=1, out=s[1:, 1:])
        return s

    def count_in_rect(self, x: int, y: int, w: int, h: int) -> int:
        s = self.integral
        return int(s[y + h, x + w] - s[y, x + w] - s[y + h, x] + s[y, x])

    @property
    def width(self) -> int:
        return self.cover.width

    @property
    def height(self) -> int:
        return self.cover.height

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, StegoPair):
            return NotImplemented
        return self.cover == other.cover and self.stego == other.stego

    def __hash__(self) -> int:
        return hash((self.cover, self.stego))


# --- payload -> change rate ----------------------------------------------


def ternary_entropy(rho: float) -> float:
    """Bits per pixel carried by a +-1 embedding that changes a fraction ``rho`` of pixels."""
    if rho <= 0.0:
        return 0.0
    if rho >= 1.0:
        return 1.0
    return -rho * math.log2(rho / 2.0) - (1.0 - rho) * math.log2(1.0 - rho)


def bpp_to_change_rate(alpha: float) -> float:
    """Smallest change rate whose ternary entropy equals the payload ``alpha`` (bits per pixel).

    This is the idealized bound for optimal +-1 coding; practical embedders change more.
    """
    if not 0.0 < alpha < LOG2_3:
        raise OutOfRange(f"payload must lie in (0, log2 3), got {alpha}")
    # ternary_entropy is strictly increasing on (0, 2/3] and reaches log2 3 at 2/3
    return optimize.brentq(lambda r: ternary_entropy(r) - alpha, 1e-300, 2.0 / 3.0, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


# --- embedding -----------------------------------------------------------


def _apply_changes(cover: GrayImage, change: np.ndarray, rng: np.random.Generator) -> StegoPair:
    px = cover.pixels
    sign = rng.integers(0, 2, size=px.shape, dtype=np.int16) * 2 - 1
    sign[px == 0] = 1
    sign[px == 255] = -1
    if not change.any():
        raise DegenerateOutput("no pixel was modified; re-seed")
    stego = px.astype(np.int16) + sign * change
    return StegoPair(cover, GrayImage(stego.astype(np.uint8)))


def embed_uniform(cover: GrayImage, spec: EmbedSpec, rng: np.random.Generator | int | None = None) -> StegoPair:
    """Change each pixel by +-1 independently with probability ``spec.change_rate``.

    Direction is a fair coin except at 0 (forced +1) and 255 (forced -1).
    ``rng`` defaults to a generator seeded from ``spec.seed``.
    """
    if spec.mode is not Mode.UNIFORM:
        raise ValueError("embed_uniform needs a UNIFORM spec")
    rng = as_generator(spec.seed if rng is None else rng)
    change = rng.random(cover.shape) < spec.change_rate
    return _apply_changes(cover, change, rng)


def local_variance(img: GrayImage, window: int) -> np.ndarray:
    x = img.pixels.astype(np.float64)
    mean = ndimage.uniform_filter(x, size=window, mode="reflect")
    mean_sq = ndimage.uniform_filter(x * x, size=window, mode="reflect")
    var = mean_sq - mean * mean
    # cancellation noise on flat patches
    var[var < 1e-9] = 0.0
    return var


def change_probabilities(weights: np.ndarray, expected_changes: float) -> np.ndarray:
    """Scale ``weights`` to probabilities summing to ``expected_changes``, saturating at 1.

    Saturated entries are pinned at 1 and the remainder is rescaled (water filling),
    so the expected total stays exact unless fewer than ``expected_changes`` weights are positive.
    """
    flat = weights.ravel()
    pos = flat[flat > 0]
    if pos.size == 0:
        raise FlatImage("all weights are zero")
    if expected_changes >= pos.size:
        return (weights > 0).astype(np.float64)
    v = np.sort(pos)[::-1]
    tail = np.cumsum(v[::-1])[::-1]  # tail[k] = sum(v[k:])
    k = np.arange(v.size)
    scale = (expected_changes - k) / tail
    k_sat = int(np.argmax(scale * v <= 1.0))
    return np.minimum(1.0, weights * scale[k_sat])


def embed_adaptive(cover: GrayImage, spec: EmbedSpec, rng: np.random.Generator | int | None = None) -> StegoPair:
    """Change pixels with probability proportional to local variance over ``spec.adaptive_window``."""
    if spec.mode is not Mode.ADAPTIVE:
        raise ValueError("embed_adaptive needs an ADAPTIVE spec")
    var = local_variance(cover, spec.adaptive_window)
    if not var.any():
        raise FlatImage("cover has zero local variance everywhere")
    p = change_probabilities(var, spec.change_rate * cover.width * cover.height)
    rng = as_generator(spec.seed if rng is None else rng)
    change = rng.random(cover.shape) < p
    return _apply_changes(cover, change, rng)


def embed(cover: GrayImage, spec: EmbedSpec, rng: np.random.Generator | int | None = None) -> StegoPair:
    if spec.mode is Mode.UNIFORM:
        return embed_uniform(cover, spec, rng)
    return embed_adaptive(cover, spec, rng)


# --- synthetic sources ---------------------------------------------------


def synthetic_cover(width: int, height: int, rng: np.random.Generator) -> GrayImage:
    """Smooth blobs plus fine grain: enough texture for the adaptive map to be non-trivial."""
    coarse = ndimage.gaussian_filter(rng.normal(size=(height, width)), sigma=max(width, height) / 16)
    coarse = (coarse - coarse.min()) / (np.ptp(coarse) + 1e-12)
    grain = rng.normal(scale=8.0, size=(height, width))
    return GrayImage(np.clip(np.rint(40 + 170 * coarse + grain), 0, 255).astype(np.uint8))


def synthetic_pairs(
    change_rate: float,
    n_pairs: int,
    size: int = 256,
    mode: Mode = Mode.UNIFORM,
    seed: int = 0,
    window: int = 3,
) -> list[StegoPair]:
    """``n_pairs`` independent cover/stego pairs; pair i depends only on (seed, i)."""
    pairs = []
    for i in range(n_pairs):
        cover = synthetic_cover(size, size, substream(seed, "synthetic-cover", i))
        spec = EmbedSpec(change_rate, mode, window, seed)
        pairs.append(embed(cover, spec, substream(seed, "synthetic-embed", i)))
    return pairs
