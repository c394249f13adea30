"""BMIX batch container and CSV emitters.

BMIX layout, all fields little-endian, no padding::

    header      magic "BMIX" | version u16 (=1) | flags u16 | image_count u32 (=2N) | width u32 | height u32
    rasters     image_count x (height x width) pixels, row-major; u8, or f32 when flags bit 0 is set
    labels      image_count x f32
    provenance  N x ( d4 u8 | method u8 | bbox x,y,w,h 4 x u32 | lam f32 )

The header is 20 bytes and each provenance record 22 bytes.
"""

from __future__ import annotations

import csv
import io
import struct
from typing import BinaryIO, TextIO

import numpy as np

from bitmix.augment import AugmentedBatch, BBox, PairRecord
from bitmix.errors import (
    BadMagic,
    EmptyBatch,
    LabelOutOfRange,
    MalformedContainer,
    MixedPixelKinds,
    Truncated,
    UnsupportedVersion,
)
from bitmix.stats import Heatmap, Histogram

MAGIC = b"BMIX"
VERSION = 1
FLAG_FLOAT32 = 0x0001

HEADER = struct.Struct("<4sHHIII")
RECORD = struct.Struct("<BBIIIIf")
assert HEADER.size == 20 and RECORD.size == 22


def encoded_size(n_pairs: int, width: int, height: int, float_pixels: bool = False) -> int:
    images = 2 * n_pairs
    return HEADER.size + images * width * height * (4 if float_pixels else 1) + images * 4 + n_pairs * RECORD.size


def dumps_batch(batch: AugmentedBatch) -> bytes:
    if batch is None or batch.n_pairs == 0:
        raise EmptyBatch("nothing to serialize")
    dtype = batch.images.dtype
    if dtype == np.uint8:
        flags, raster = 0, batch.images.tobytes()
    elif dtype == np.float32:
        flags, raster = FLAG_FLOAT32, batch.images.astype("<f4", copy=False).tobytes()
    else:
        raise MixedPixelKinds(f"unsupported pixel dtype {dtype}")
    parts = [
        HEADER.pack(MAGIC, VERSION, flags, 2 * batch.n_pairs, batch.width, batch.height),
        raster,
        batch.labels.astype("<f4", copy=False).tobytes(),
    ]
    parts.extend(RECORD.pack(int(r.transform), int(r.method), *r.bbox.as_tuple(), r.lam) for r in batch.provenance)
    return b"".join(parts)


def write_batch(batch: AugmentedBatch, sink: BinaryIO) -> int:
    """Serialize ``batch`` to ``sink``; returns the number of bytes written."""
    data = dumps_batch(batch)
    sink.write(data)
    return len(data)


def _take(buf: memoryview, pos: int, n: int, what: str) -> memoryview:
    if pos + n > len(buf):
        raise Truncated(f"container ends inside {what} (need {pos + n} bytes, have {len(buf)})")
    return buf[pos : pos + n]


def loads_batch(data: bytes) -> AugmentedBatch:
    """Exact inverse of :func:`dumps_batch`. Trailing bytes are rejected."""
    buf = memoryview(bytes(data))
    if len(buf) < 4 or bytes(buf[:4]) != MAGIC:
        raise BadMagic(f"expected {MAGIC!r}, got {bytes(buf[:4])!r}")
    magic, version, flags, count, width, height = HEADER.unpack(_take(buf, 0, HEADER.size, "header"))
    if version != VERSION:
        raise UnsupportedVersion(f"container version {version}, reader supports {VERSION}")
    if flags & ~FLAG_FLOAT32:
        raise MalformedContainer(f"unknown flag bits 0x{flags:04x}")
    if count == 0 or count % 2:
        raise MalformedContainer(f"image_count must be even and positive, got {count}")
    if width == 0 or height == 0:
        raise MalformedContainer("zero image dimension")
    n = count // 2
    dtype = np.dtype("<f4") if flags & FLAG_FLOAT32 else np.dtype(np.uint8)
    pos = HEADER.size
    nbytes = count * width * height * dtype.itemsize
    images = np.frombuffer(_take(buf, pos, nbytes, "rasters"), dtype=dtype).reshape(count, height, width)
    pos += nbytes
    labels = np.frombuffer(_take(buf, pos, 4 * count, "labels"), dtype="<f4")
    pos += 4 * count
    if np.any(~((labels >= 0) & (labels <= 1))):
        raise LabelOutOfRange("stored label outside [0, 1]")
    records = []
    for _ in range(n):
        d4, method, x, y, w, h, lam = RECORD.unpack(_take(buf, pos, RECORD.size, "provenance"))
        pos += RECORD.size
        try:
            records.append(PairRecord(d4, method, BBox(x, y, w, h), lam))
        except ValueError as exc:
            raise MalformedContainer(f"bad provenance record: {exc}") from exc
    if pos != len(buf):
        raise MalformedContainer(f"{len(buf) - pos} trailing bytes")
    return AugmentedBatch(images.astype(np.float32 if dtype.kind == "f" else np.uint8), labels.astype(np.float32), tuple(records))


def read_batch(source: BinaryIO | bytes) -> AugmentedBatch:
    if isinstance(source, (bytes, bytearray, memoryview)):
        return loads_batch(source)
    return loads_batch(source.read())


# --- CSV -----------------------------------------------------------------


def _g(v: float) -> str:
    return f"{float(v):.9g}"


def _writer(sink: TextIO):
    return csv.writer(sink, lineterminator="\n")


def _counting(sink: TextIO, body) -> int:
    tmp = io.StringIO()
    body(_writer(tmp))
    text = tmp.getvalue()
    sink.write(text)
    return len(text.encode("utf-8"))


def write_csv_histogram(h: Histogram, sink: TextIO) -> int:
    """``bin_lo,bin_hi,count,frequency`` rows; an empty histogram gets frequency 0 everywhere."""

    def body(w):
        w.writerow(["bin_lo", "bin_hi", "count", "frequency"])
        for lo, hi, c, f in zip(h.bin_edges[:-1], h.bin_edges[1:], h.counts, h.frequencies):
            w.writerow([_g(lo), _g(hi), int(c), _g(f)])

    return _counting(sink, body)


def read_csv_histogram(source: TextIO) -> Histogram:
    rows = list(csv.reader(source))
    if not rows or rows[0] != ["bin_lo", "bin_hi", "count", "frequency"]:
        raise ValueError("not a histogram CSV")
    body = rows[1:]
    edges = [float(r[0]) for r in body] + [float(body[-1][1])]
    return Histogram(np.array(edges), np.array([int(r[2]) for r in body], dtype=np.int64))


def write_csv_lambda_long(histograms: dict[float, Histogram], sink: TextIO) -> int:
    """Long format with one row per (gamma, bin) for plotting several histograms together."""

    def body(w):
        w.writerow(["gamma", "bin_lo", "bin_hi", "count", "frequency"])
        for gamma, h in histograms.items():
            for lo, hi, c, f in zip(h.bin_edges[:-1], h.bin_edges[1:], h.counts, h.frequencies):
                w.writerow([_g(gamma), _g(lo), _g(hi), int(c), _g(f)])

    return _counting(sink, body)


def write_csv_scores(summary: dict[str, float | int], sink: TextIO) -> int:
    """One ``metric,value`` row per entry, in insertion order."""

    def body(w):
        w.writerow(["metric", "value"])
        for k, v in summary.items():
            w.writerow([k, v if isinstance(v, (int, np.integer)) else _g(v)])

    return _counting(sink, body)


def write_csv_heatmap(hm: Heatmap, sink: TextIO) -> int:
    """``x,y,density`` rows in row-major order; density is per accepted sample."""
    d = hm.normalized()

    def body(w):
        w.writerow(["x", "y", "density"])
        for y in range(hm.height):
            row = d[y]
            w.writerows([x, y, _g(row[x])] for x in range(hm.width))

    return _counting(sink, body)
