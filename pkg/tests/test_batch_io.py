import io
import struct

import numpy as np
import pytest

from bitmix.augment import AugmentedBatch, BBox, Method, MixConfig, PairRecord, assemble_batch
from bitmix.batch_io import (
    dumps_batch,
    encoded_size,
    loads_batch,
    read_batch,
    read_csv_histogram,
    write_batch,
    write_csv_heatmap,
    write_csv_histogram,
    write_csv_lambda_long,
    write_csv_scores,
)
from bitmix.errors import BadMagic, EmptyBatch, LabelOutOfRange, MalformedContainer, Truncated, UnsupportedVersion
from bitmix.image_core import D4Transform
from bitmix.stats import Heatmap, Histogram

from conftest import random_pair


def tiny_batch():
    images = np.array([[[1, 2], [3, 4]], [[5, 6], [7, 8]]], dtype=np.uint8)
    rec = PairRecord(D4Transform.ROT90, Method.BITMIX, BBox(0, 1, 2, 1), 0.25)
    return AugmentedBatch(images, np.array([0.75, 0.25], np.float32), (rec,))


class TestContainer:
    def test_size_by_construction(self):
        # header 4+2+2+4+4+4, pixels 2*4*1, labels 2*4, one record 1+1+4*4+4
        expected = (4 + 2 + 2 + 4 + 4 + 4) + 2 * 4 + 2 * 4 + (1 + 1 + 16 + 4)
        assert expected == 58
        sink = io.BytesIO()
        assert write_batch(tiny_batch(), sink) == expected
        assert len(sink.getvalue()) == expected == encoded_size(1, 2, 2)

    def test_byte_layout(self):
        data = dumps_batch(tiny_batch())
        assert data[:4] == b"BMIX"
        assert struct.unpack_from("<HHIII", data, 4) == (1, 0, 2, 2, 2)
        assert data[20:28] == bytes([1, 2, 3, 4, 5, 6, 7, 8])
        assert struct.unpack_from("<2f", data, 28) == (0.75, 0.25)
        assert struct.unpack_from("<BBIIIIf", data, 36) == (1, 1, 0, 1, 2, 1, 0.25)

    def test_float_flag(self):
        b = AugmentedBatch(np.full((2, 1, 1), 0.5, np.float32), np.array([1.0, 0.0]), (PairRecord(0, 3, BBox.empty(), 0.1),))
        data = dumps_batch(b)
        assert struct.unpack_from("<H", data, 6) == (1,)
        assert struct.unpack_from("<2f", data, 20) == (0.5, 0.5)
        assert len(data) == encoded_size(1, 1, 1, float_pixels=True)
        assert loads_batch(data) == b

    def test_empty_batch_never_serialized(self):
        with pytest.raises(EmptyBatch):
            assemble_batch([], MixConfig())

    def test_round_trip_random_batches(self, rng):
        for k in range(100):
            n = int(rng.integers(1, 6))
            w, h = (int(v) for v in rng.integers(2, 12, 2))
            if k % 2:
                h = w
            pairs = [random_pair(rng, w, h, 0.3) for _ in range(n)]
            method = [Method.BITMIX, Method.CUTMIX, Method.MIXUP, Method.NONE][k % 4]
            cfg = MixConfig(gamma=float(rng.uniform(0.05, 1.0)), method=method, apply_fraction=float(rng.uniform()), seed=k, cover_label=k % 2)
            batch = assemble_batch(pairs, cfg)
            data = dumps_batch(batch)
            back = read_batch(io.BytesIO(data))
            assert back == batch
            assert dumps_batch(back) == data
            assert back.images.dtype == batch.images.dtype

    def test_deterministic_bytes(self, rng):
        pairs = [random_pair(rng, 8, 8) for _ in range(4)]
        cfg = MixConfig(seed=12)
        assert dumps_batch(assemble_batch(pairs, cfg)) == dumps_batch(assemble_batch(pairs, cfg))

    def test_bad_magic(self):
        data = bytearray(dumps_batch(tiny_batch()))
        data[0:4] = b"XMIB"
        with pytest.raises(BadMagic):
            loads_batch(bytes(data))
        with pytest.raises(BadMagic):
            loads_batch(b"")

    def test_unsupported_version(self):
        data = bytearray(dumps_batch(tiny_batch()))
        struct.pack_into("<H", data, 4, 2)
        with pytest.raises(UnsupportedVersion):
            loads_batch(bytes(data))

    @pytest.mark.parametrize("cut", [10, 20, 27, 35, 57])
    def test_truncated(self, cut):
        with pytest.raises(Truncated):
            loads_batch(dumps_batch(tiny_batch())[:cut])

    def test_label_out_of_range(self):
        data = bytearray(dumps_batch(tiny_batch()))
        struct.pack_into("<f", data, 28, 1.5)
        with pytest.raises(LabelOutOfRange):
            loads_batch(bytes(data))
        struct.pack_into("<f", data, 28, float("nan"))
        with pytest.raises(LabelOutOfRange):
            loads_batch(bytes(data))

    @pytest.mark.parametrize(
        "patch",
        [
            lambda d: struct.pack_into("<I", d, 8, 3),  # odd image count
            lambda d: struct.pack_into("<H", d, 6, 2),  # unknown flag
            lambda d: d.__setitem__(36, 9),  # D4 code out of range
            lambda d: d.__setitem__(37, 7),  # method code out of range
            lambda d: d.extend(b"\0"),  # trailing data
        ],
    )
    def test_malformed(self, patch):
        data = bytearray(dumps_batch(tiny_batch()))
        patch(data)
        with pytest.raises(MalformedContainer):
            loads_batch(bytes(data))


class TestCSV:
    def test_two_bin_histogram(self):
        h = Histogram(np.array([0.0, 0.5, 1.0]), np.array([3, 1]))
        sink = io.StringIO()
        n = write_csv_histogram(h, sink)
        text = sink.getvalue()
        assert n == len(text.encode())
        assert text == "bin_lo,bin_hi,count,frequency\n0,0.5,3,0.75\n0.5,1,1,0.25\n"

    def test_empty_histogram(self):
        sink = io.StringIO()
        write_csv_histogram(Histogram.unit_interval(3), sink)
        rows = sink.getvalue().splitlines()[1:]
        assert [r.split(",")[3] for r in rows] == ["0", "0", "0"]

    def test_reparse_and_frequency_sum(self, rng):
        h = Histogram.of(rng.random(997), bins=50)
        sink = io.StringIO()
        write_csv_histogram(h, sink)
        assert "\r" not in sink.getvalue()
        sink.seek(0)
        back = read_csv_histogram(sink)
        assert np.array_equal(back.counts, h.counts)
        assert np.allclose(back.bin_edges, h.bin_edges, rtol=1e-9)
        freqs = [float(r.split(",")[3]) for r in sink.getvalue().splitlines()[1:]]
        assert abs(sum(freqs) - 1) < 1e-9

    def test_nine_significant_digits(self):
        sink = io.StringIO()
        write_csv_histogram(Histogram(np.array([0.0, 1 / 3, 1.0]), np.array([1, 2])), sink)
        assert sink.getvalue().splitlines()[1:] == ["0,0.333333333,1,0.333333333", "0.333333333,1,2,0.666666667"]

    def test_scores_and_long_and_heatmap(self):
        sink = io.StringIO()
        write_csv_scores({"n_cover": 2, "n_stego": 2, "p_e": 0.25, "auc": 0.75}, sink)
        assert sink.getvalue() == "metric,value\nn_cover,2\nn_stego,2\np_e,0.25\nauc,0.75\n"
        sink = io.StringIO()
        h = Histogram(np.array([0.0, 0.5, 1.0]), np.array([1, 1]))
        write_csv_lambda_long({0.25: h, 1.0: h}, sink)
        lines = sink.getvalue().splitlines()
        assert lines[0] == "gamma,bin_lo,bin_hi,count,frequency" and lines[1] == "0.25,0,0.5,1,0.5" and len(lines) == 5
        sink = io.StringIO()
        write_csv_heatmap(Heatmap(np.array([[0.0, 2.0]]), 4), sink)
        assert sink.getvalue() == "x,y,density\n0,0,0\n1,0,0.5\n"
