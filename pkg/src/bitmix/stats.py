"""Distribution studies of the modified-pixel ratio, spatial heatmaps, and detection metrics."""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy import stats as sps

from bitmix.augment import sample_bbox
from bitmix.errors import DimensionMismatch, NoSamplesInBand, SingleClass
from bitmix.image_core import GrayImage
from bitmix.rng import as_generator
from bitmix.stego_sim import StegoPair

PairSource = Sequence[StegoPair] | Iterable[StegoPair]


@dataclass(frozen=True, eq=False)
class Histogram:
    bin_edges: np.ndarray
    counts: np.ndarray

    def __post_init__(self) -> None:
        edges = np.asarray(self.bin_edges, dtype=np.float64)
        counts = np.asarray(self.counts, dtype=np.int64)
        if edges.ndim != 1 or counts.ndim != 1 or len(counts) != len(edges) - 1:
            raise ValueError("need len(counts) == len(bin_edges) - 1")
        if np.any(np.diff(edges) <= 0):
            raise ValueError("bin edges must be strictly ascending")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def unit_interval(cls, bins: int) -> Histogram:
        """Empty histogram with ``bins`` equal-width bins over [0, 1] (last bin closed)."""
        if bins < 1:
            raise ValueError("bins must be >= 1")
        return cls(np.linspace(0.0, 1.0, bins + 1), np.zeros(bins, dtype=np.int64))

    @classmethod
    def of(cls, values, bins: int = 50) -> Histogram:
        counts, edges = np.histogram(np.asarray(values, dtype=np.float64), bins=bins, range=(0.0, 1.0))
        return cls(edges, counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def frequencies(self) -> np.ndarray:
        if self.total == 0:
            return np.zeros(len(self.counts))
        return self.counts / self.total

    def merge(self, other: Histogram) -> Histogram:
        if not np.array_equal(self.bin_edges, other.bin_edges):
            raise ValueError("cannot merge histograms with different bins")
        return Histogram(self.bin_edges, self.counts + other.counts)

    __add__ = merge

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Histogram):
            return NotImplemented
        return np.array_equal(self.bin_edges, other.bin_edges) and np.array_equal(self.counts, other.counts)


def total_variation(a: Histogram, b: Histogram) -> float:
    if not np.array_equal(a.bin_edges, b.bin_edges):
        raise ValueError("histograms have different bins")
    return 0.5 * float(np.abs(a.frequencies - b.frequencies).sum())


def _pair_stream(pair_source: PairSource) -> Iterator[tuple[int, StegoPair]]:
    """Yield (key, pair). Sequences are cycled so each distinct pair has a stable key."""
    if isinstance(pair_source, Sequence):
        if len(pair_source) == 0:
            raise ValueError("empty pair source")
        for k in itertools.count():
            i = k % len(pair_source)
            yield i, pair_source[i]
    else:
        for k, pair in enumerate(pair_source):
            yield k, pair


def _draw(pair_source: PairSource, gamma: float, n: int, rng: np.random.Generator):
    drawn = 0
    for key, pair in _pair_stream(pair_source):
        box = sample_bbox(pair.width, pair.height, gamma, rng)
        yield key, pair, box, pair.count_in_rect(box.x, box.y, box.w, box.h) / pair.n_modified
        drawn += 1
        if drawn == n:
            return
    if drawn < n:
        raise ValueError(f"pair source ran dry after {drawn} of {n} samples")


def sample_lambdas(pair_source: PairSource, gamma: float, n_samples: int, rng=None) -> np.ndarray:
    """Modified-pixel ratios of ``n_samples`` random boxes drawn over the source's pairs."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = as_generator(rng)
    return np.fromiter((lam for *_, lam in _draw(pair_source, gamma, n_samples, rng)), dtype=np.float64, count=n_samples)


def lambda_distribution(pair_source: PairSource, gamma: float, n_samples: int, bins: int = 50, rng=None) -> Histogram:
    """Histogram of the modified-pixel ratio over equal-width bins on [0, 1].

    A sequence source is cycled in order; any other iterable is consumed one pair per sample.
    """
    if bins < 2:
        raise ValueError("bins must be >= 2")
    return Histogram.of(sample_lambdas(pair_source, gamma, n_samples, rng), bins)


# --- heatmaps ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Heatmap:
    """Per-pixel count of surviving modifications summed over ``accepted`` augmented samples."""

    density: np.ndarray
    accepted: int

    @property
    def width(self) -> int:
        return self.density.shape[1]

    @property
    def height(self) -> int:
        return self.density.shape[0]

    def normalized(self) -> np.ndarray:
        if self.accepted == 0:
            return np.zeros_like(self.density, dtype=np.float64)
        return self.density / self.accepted

    def merge(self, other: Heatmap) -> Heatmap:
        if self.density.shape != other.density.shape:
            raise DimensionMismatch("heatmaps differ in size")
        return Heatmap(self.density + other.density, self.accepted + other.accepted)

    def region_means(self, border: float = 0.25) -> tuple[float, float]:
        """(interior mean, border-frame mean) of the normalized density.

        The frame is the outer ``border`` fraction of each side, so border=0.25
        leaves the central half of each axis as interior.
        """
        d = self.normalized()
        ty = int(round(self.height * border))
        tx = int(round(self.width * border))
        inner = np.zeros(d.shape, dtype=bool)
        inner[ty : self.height - ty, tx : self.width - tx] = True
        if not inner.any() or inner.all():
            raise ValueError(f"border {border} leaves an empty region")
        return float(d[inner].mean()), float(d[~inner].mean())

    def to_image(self) -> GrayImage:
        """Density scaled so its maximum maps to 255 (all-zero stays zero)."""
        d = self.normalized()
        peak = d.max()
        scaled = np.zeros(d.shape) if peak <= 0 else d * (255.0 / peak)
        return GrayImage(np.clip(np.floor(scaled + 0.5), 0, 255).astype(np.uint8))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Heatmap):
            return NotImplemented
        return self.accepted == other.accepted and np.array_equal(self.density, other.density)


def modified_pixel_heatmap(
    pair_source: PairSource,
    gamma: float,
    target_lambda_band: tuple[float, float],
    n_samples: int,
    rng=None,
    *,
    side: str = "sc",
    accept_target: int | None = None,
) -> Heatmap:
    """Where do modified pixels sit in augmented outputs whose ratio falls in a band?

    Draws up to ``n_samples`` boxes; for each whose ratio lies in ``[lo, hi]`` it adds the
    modification mask of the chosen output: ``side="sc"`` counts modifications left in S_C
    (outside the box), ``side="cs"`` those carried into C_S (inside). Stops early once
    ``accept_target`` samples were accepted.
    """
    lo, hi = target_lambda_band
    if not 0.0 <= lo < hi <= 1.0:
        raise ValueError(f"band must satisfy 0 <= lo < hi <= 1, got {target_lambda_band}")
    if side not in ("sc", "cs"):
        raise ValueError("side must be 'sc' or 'cs'")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = as_generator(rng)

    # Per distinct pair: how often it was accepted, and a 2-D difference array of box
    # coverage. Coverage counts come from one prefix sum at the end instead of a mask per draw.
    accepted_by: dict[int, int] = {}
    cover_diff: dict[int, np.ndarray] = {}
    pairs: dict[int, StegoPair] = {}
    accepted = 0
    shape = None
    for key, pair, box, lam in _draw(pair_source, gamma, n_samples, rng):
        if shape is None:
            shape = pair.cover.shape
        elif pair.cover.shape != shape:
            raise DimensionMismatch("heatmap sources must share one image size")
        if not lo <= lam <= hi:
            continue
        if key not in pairs:
            pairs[key] = pair
            accepted_by[key] = 0
            cover_diff[key] = np.zeros((shape[0] + 1, shape[1] + 1), dtype=np.int64)
        accepted_by[key] += 1
        d = cover_diff[key]
        d[box.y, box.x] += 1
        d[box.y, box.x + box.w] -= 1
        d[box.y + box.h, box.x] -= 1
        d[box.y + box.h, box.x + box.w] += 1
        accepted += 1
        if accept_target is not None and accepted >= accept_target:
            break

    if accepted == 0:
        raise NoSamplesInBand(f"no ratio fell in [{lo}, {hi}] after {n_samples} draws", attempts=n_samples)

    density = np.zeros(shape, dtype=np.float64)
    for key, pair in pairs.items():
        inside = np.cumsum(np.cumsum(cover_diff[key], axis=0), axis=1)[:-1, :-1]
        hits = inside if side == "cs" else accepted_by[key] - inside
        density += pair.modified * hits
    return Heatmap(density, accepted)


# --- detection metrics ---------------------------------------------------


class Truth(enum.Enum):
    COVER = "cover"
    STEGO = "stego"


@dataclass(frozen=True)
class ScoredSample:
    """Detector output; higher scores mean more stego-like."""

    score: float
    truth: Truth

    def __post_init__(self) -> None:
        if not np.isfinite(self.score):
            raise ValueError(f"score must be finite, got {self.score}")
        object.__setattr__(self, "truth", Truth(self.truth))


def _split(samples: Sequence[ScoredSample]) -> tuple[np.ndarray, np.ndarray]:
    cover = np.array([s.score for s in samples if s.truth is Truth.COVER], dtype=np.float64)
    stego = np.array([s.score for s in samples if s.truth is Truth.STEGO], dtype=np.float64)
    if cover.size == 0 or stego.size == 0:
        raise SingleClass("need at least one cover and one stego sample")
    return cover, stego


def p_e(samples: Sequence[ScoredSample]) -> float:
    """Minimum over thresholds of (false-alarm rate + missed-detection rate) / 2.

    A sample is called stego when its score exceeds the threshold. Every distinct
    score is tried as a threshold, plus minus infinity.
    """
    cover, stego = _split(samples)
    cover.sort()
    stego.sort()
    thresholds = np.unique(np.concatenate([cover, stego]))
    false_alarm = 1.0 - np.searchsorted(cover, thresholds, side="right") / cover.size
    missed = np.searchsorted(stego, thresholds, side="right") / stego.size
    errors = 0.5 * (false_alarm + missed)
    # threshold -inf: everything called stego
    return float(min(0.5, errors.min()))


def auc(samples: Sequence[ScoredSample]) -> float:
    """P(stego score > cover score) + P(tie)/2, from average ranks."""
    cover, stego = _split(samples)
    ranks = sps.rankdata(np.concatenate([cover, stego]), method="average")
    u = ranks[cover.size :].sum() - stego.size * (stego.size + 1) / 2.0
    return float(u / (cover.size * stego.size))

