"""8-bit grayscale rasters, binary PGM I/O, the eight D4 symmetries, pixel-difference counts."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from bitmix.errors import DimensionMismatch, MalformedHeader, TruncatedData, UnsupportedMaxval


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Immutable W x H raster of uint8 intensities, stored as an (H, W) array.

    ``pixels[y, x]`` addresses column x of row y; the flat row-major view is ``pixels.ravel()``.
    """

    pixels: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.pixels)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionMismatch(f"expected a non-empty 2-D raster, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if not np.issubdtype(arr.dtype, np.integer) or arr.min() < 0 or arr.max() > 255:
                raise ValueError("pixels must be integers in [0, 255]")
            arr = arr.astype(np.uint8)
        arr = np.array(arr, dtype=np.uint8, order="C", copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @classmethod
    def from_flat(cls, width: int, height: int, values) -> GrayImage:
        flat = np.asarray(values)
        if flat.size != width * height:
            raise DimensionMismatch(f"{flat.size} pixels for a {width}x{height} image")
        return cls(flat.reshape(height, width))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.pixels, other.pixels)

    def __hash__(self) -> int:
        return hash((self.shape, self.pixels.tobytes()))

    def __repr__(self) -> str:
        return f"GrayImage({self.width}x{self.height})"


# --- PGM -----------------------------------------------------------------

_WS = b" \t\n\r\v\f"


def _read_field(data: bytes, pos: int) -> tuple[int, int]:
    """Skip whitespace and ``#`` comments, then read one decimal field. Returns (value, new_pos)."""
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c in _WS:
            pos += 1
        elif c == b"#":
            nl = data.find(b"\n", pos)
            pos = n if nl < 0 else nl + 1
        else:
            break
    start = pos
    while pos < n and data[pos : pos + 1].isdigit():
        pos += 1
    if pos == start:
        raise MalformedHeader(f"expected a decimal header field at byte {start}")
    if pos < n and data[pos : pos + 1] not in _WS and data[pos : pos + 1] != b"#":
        raise MalformedHeader(f"junk after header field at byte {pos}")
    return int(data[start:pos]), pos


def load_pgm(data: bytes) -> GrayImage:
    """Parse a binary (P5) PGM with maxval <= 255. Pixel values are returned unscaled."""
    data = bytes(data)
    if data[:2] != b"P5":
        raise MalformedHeader(f"expected magic b'P5', got {data[:2]!r}")
    width, pos = _read_field(data, 2)
    height, pos = _read_field(data, pos)
    maxval, pos = _read_field(data, pos)
    if width < 1 or height < 1:
        raise MalformedHeader(f"bad dimensions {width}x{height}")
    if maxval < 1 or maxval > 65535:
        raise MalformedHeader(f"bad maxval {maxval}")
    if maxval > 255:
        raise UnsupportedMaxval(f"maxval {maxval} needs 16-bit samples")
    # exactly one whitespace byte separates maxval from the raster
    if pos >= len(data):
        raise TruncatedData("no raster after header")
    if data[pos : pos + 1] not in _WS:
        raise MalformedHeader("maxval must be followed by a single whitespace byte")
    pos += 1
    n = width * height
    raster = data[pos : pos + n]
    if len(raster) < n:
        raise TruncatedData(f"expected {n} pixel bytes, got {len(raster)}")
    return GrayImage(np.frombuffer(raster, dtype=np.uint8).reshape(height, width))


def save_pgm(img: GrayImage) -> bytes:
    """Canonical form: ``P5\\n<W> <H>\\n255\\n`` followed by the raw raster."""
    return b"P5\n%d %d\n255\n" % (img.width, img.height) + img.pixels.tobytes()


# --- D4 ------------------------------------------------------------------


class D4Transform(enum.IntEnum):
    """Rotations by multiples of 90 degrees (counter-clockwise) and their horizontal mirrors.

    Variant ``FLIPH_ROTk`` means: rotate by k*90 degrees, then mirror left-right.
    The integer value is ``4 * flip + k``, which is also the on-disk code.
    """

    IDENTITY = 0
    ROT90 = 1
    ROT180 = 2
    ROT270 = 3
    FLIPH = 4
    FLIPH_ROT90 = 5
    FLIPH_ROT180 = 6
    FLIPH_ROT270 = 7

    @property
    def flip(self) -> int:
        return self.value >> 2

    @property
    def turns(self) -> int:
        return self.value & 3

    @property
    def swaps_axes(self) -> bool:
        return self.turns % 2 == 1

    @classmethod
    def make(cls, flip: int, turns: int) -> D4Transform:
        return cls(4 * (flip & 1) + (turns % 4))

    def inverse(self) -> D4Transform:
        if self.flip:
            return self  # every reflection is an involution
        return D4Transform.make(0, -self.turns)

    def then(self, other: D4Transform) -> D4Transform:
        """The transform equivalent to applying ``self`` first and ``other`` second."""
        # Elements are F^a R^b (R applied first); R F = F R^-1.
        a, b = other.flip, other.turns
        c, d = self.flip, self.turns
        return D4Transform.make(a ^ c, (-b if c else b) + d)

    def apply_array(self, arr: np.ndarray) -> np.ndarray:
        """Apply to the last two axes of ``arr`` (rows, columns)."""
        out = np.rot90(arr, self.turns, axes=(-2, -1))
        if self.flip:
            out = np.flip(out, axis=-1)
        return out


def apply_d4(img: GrayImage, t: D4Transform) -> GrayImage:
    return GrayImage(t.apply_array(img.pixels))


# --- differences ---------------------------------------------------------


def _check_same(a: GrayImage, b: GrayImage) -> None:
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.width}x{a.height} vs {b.width}x{b.height}")


def diff_mask(a: GrayImage, b: GrayImage) -> np.ndarray:
    """Boolean (H, W) raster, True where the two images differ."""
    _check_same(a, b)
    return a.pixels != b.pixels


def diff_count(a: GrayImage, b: GrayImage) -> int:
    """Number of pixel positions where ``a`` and ``b`` differ (an L0 count)."""
    return int(np.count_nonzero(diff_mask(a, b)))
