from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bitmix.augment import (
    AugmentedBatch,
    BBox,
    Method,
    MixConfig,
    PixelKind,
    assemble_batch,
    bbox_apply_d4,
    bbox_for_fraction,
    bitmix_pair,
    cutmix_labels,
    cutmix_pair,
    float32_complement,
    mixup_pair,
    sample_bbox,
)
from bitmix.errors import BoxOutOfBounds, DimensionMismatch, EmptyBatch, LabelOutOfRange
from bitmix.image_core import D4Transform, GrayImage, apply_d4, diff_count
from bitmix.stego_sim import EmbedSpec, StegoPair, embed_uniform, synthetic_cover

from conftest import random_pair, stego_pairs


@st.composite
def pairs_and_boxes(draw, max_side=12):
    pair = draw(stego_pairs(max_side=max_side))
    w = draw(st.integers(0, pair.width))
    h = draw(st.integers(0, pair.height))
    x = draw(st.integers(0, pair.width - w))
    y = draw(st.integers(0, pair.height - h))
    return pair, BBox(x, y, w, h)


def planted_pair(counts_by_region: dict[tuple[int, int, int, int], int], size=256, seed=0) -> StegoPair:
    """Cover with exactly the requested number of +1 changes inside each disjoint region."""
    rng = np.random.default_rng(seed)
    cover = rng.integers(10, 240, (size, size)).astype(np.uint8)
    stego = cover.copy()
    for (x, y, w, h), k in counts_by_region.items():
        idx = rng.choice(w * h, size=k, replace=False)
        ys, xs = np.unravel_index(idx, (h, w))
        stego[ys + y, xs + x] += 1
    return StegoPair(GrayImage(cover), GrayImage(stego))


@pytest.fixture(scope="module")
def fig1_pair():
    return planted_pair({(0, 0, 128, 128): 621, (128, 128, 128, 128): 1416, (128, 0, 128, 128): 1600, (0, 128, 128, 128): 1565})


class TestSampleBBox:
    def test_zero_fraction_gives_empty_box(self, rng):
        b = bbox_for_fraction(256, 256, 0.0, rng)
        assert (b.w, b.h) == (0, 0)

    def test_quarter_area_is_half_side(self, rng):
        for _ in range(20):
            b = bbox_for_fraction(256, 256, 0.25, rng)
            assert (b.w, b.h) == (128, 128)
            assert b.area == 256 * 256 // 4
            assert b.fits(256, 256)

    @given(st.integers(1, 300), st.integers(1, 300), st.floats(1e-6, 1.0), st.integers(0, 2**32))
    def test_box_fits_and_respects_gamma(self, w, h, gamma, seed):
        b = sample_bbox(w, h, gamma, np.random.default_rng(seed))
        assert b.fits(w, h)
        # one row and one column of rounding slack
        assert b.area <= gamma * w * h + w + h + 1

    def test_area_unbiased(self, rng):
        areas = [sample_bbox(100, 60, 0.5, rng).area for _ in range(20000)]
        assert np.mean(areas) / 6000 == pytest.approx(0.25, abs=0.005)

    def test_positions_uniform(self, rng):
        xs = [bbox_for_fraction(20, 20, 0.25, rng).x for _ in range(20000)]
        counts = np.bincount(xs, minlength=11)
        assert len(counts) == 11
        assert counts.min() > 0.8 * 20000 / 11

    @pytest.mark.parametrize("gamma", [0.0, -0.5, 1.5])
    def test_bad_gamma(self, gamma):
        with pytest.raises(ValueError):
            sample_bbox(8, 8, gamma)


class TestBitMixPair:
    # Worked example: 5,202 modified pixels; one quarter-area box holds 621, another 1,416.
    BOX_A = BBox(0, 0, 128, 128)
    BOX_B = BBox(128, 128, 128, 128)

    def test_worked_example_labels(self, fig1_pair):
        assert fig1_pair.n_modified == 5202
        a = bitmix_pair(fig1_pair, self.BOX_A)
        b = bitmix_pair(fig1_pair, self.BOX_B)
        assert a.lam_exact == Fraction(621, 5202)
        assert b.lam_exact == Fraction(1416, 5202)
        assert (round(a.label_cs, 2), round(a.label_sc, 2)) == (0.12, 0.88)
        assert (round(b.label_cs, 2), round(b.label_sc, 2)) == (0.27, 0.73)
        assert (round(a.label_cs, 4), round(a.label_sc, 4)) == (0.1194, 0.8806)
        assert (round(b.label_cs, 4), round(b.label_sc, 4)) == (0.2722, 0.7278)
        assert cutmix_labels(self.BOX_A, 256, 256) == (0.25, 0.75)

    def test_empty_box_is_identity(self, rng):
        pair = random_pair(rng, 10, 7)
        m = bitmix_pair(pair, BBox(3, 2, 0, 0))
        assert m.lam == 0.0 and (m.label_cs, m.label_sc) == (0.0, 1.0)
        assert np.array_equal(m.image_cs, pair.cover.pixels)
        assert np.array_equal(m.image_sc, pair.stego.pixels)
        assert m.pixel_kind is PixelKind.INTEGER8

    def test_full_box_swaps_everything(self, rng):
        pair = random_pair(rng, 6, 5)
        m = bitmix_pair(pair, BBox(0, 0, 6, 5))
        assert m.lam == 1.0
        assert np.array_equal(m.image_cs, pair.stego.pixels)
        assert np.array_equal(m.image_sc, pair.cover.pixels)

    def test_lambda_against_nested_loops(self, rng):
        for _ in range(200):
            pair = random_pair(rng, 8, 8, rate=rng.uniform(0.02, 0.6))
            box = sample_bbox(8, 8, 1.0, rng)
            m = bitmix_pair(pair, box)
            inside = total = 0
            c, s = pair.cover.pixels, pair.stego.pixels
            for y in range(8):
                for x in range(8):
                    if c[y, x] != s[y, x]:
                        total += 1
                        if box.x <= x < box.x + box.w and box.y <= y < box.y + box.h:
                            inside += 1
            assert m.lam_exact == Fraction(inside, total)
            assert m.lam == inside / total

    def test_out_of_bounds(self, rng):
        pair = random_pair(rng, 8, 8)
        with pytest.raises(BoxOutOfBounds):
            bitmix_pair(pair, BBox(5, 0, 4, 1))
        with pytest.raises(BoxOutOfBounds):
            BBox(-1, 0, 1, 1)

    @given(pairs_and_boxes())
    def test_swap_properties(self, pb):
        pair, box = pb
        c, s = pair.cover.pixels, pair.stego.pixels
        m = bitmix_pair(pair, box)
        cs, sc = m.image_cs, m.image_sc
        inside = box.mask(pair.width, pair.height)
        # involution
        cs2, sc2 = cs.copy(), sc.copy()
        cs2[inside], sc2[inside] = sc[inside], cs[inside]
        assert np.array_equal(cs2, c) and np.array_equal(sc2, s)
        # conservation of the per-pixel multiset
        assert np.array_equal(np.minimum(cs, sc), np.minimum(c, s))
        assert np.array_equal(np.maximum(cs, sc), np.maximum(c, s))
        # outside the box C_S is C, inside it is S
        assert np.array_equal(cs[~inside], c[~inside]) and np.array_equal(cs[inside], s[inside])
        # label simplex
        assert 0.0 <= m.label_cs <= 1.0 and m.label_cs + m.label_sc == 1.0
        assert m.lam == m.label_cs
        # decomposition: the in-box count is exactly diff(C, C_S)
        d_cs = diff_count(pair.cover, GrayImage(cs))
        d_sc = diff_count(pair.cover, GrayImage(sc))
        assert d_cs + d_sc == pair.n_modified
        assert d_cs == m.lam_exact * pair.n_modified

    @given(pairs_and_boxes(), st.sampled_from(list(D4Transform)))
    def test_d4_equivariance(self, pb, t):
        pair, box = pb
        tp = StegoPair(apply_d4(pair.cover, t), apply_d4(pair.stego, t))
        tb = bbox_apply_d4(box, pair.width, pair.height, t)
        assert tb.area == box.area
        assert bitmix_pair(tp, tb).lam_exact == bitmix_pair(pair, box).lam_exact

    def test_close_to_cutmix_for_uniform_embedding(self, rng):
        cover = synthetic_cover(256, 256, rng)
        pair = embed_uniform(cover, EmbedSpec(0.1), rng)
        gaps = []
        for _ in range(1000):
            box = sample_bbox(256, 256, 0.25, rng)
            gaps.append(abs(bitmix_pair(pair, box).lam - cutmix_labels(box, 256, 256)[0]))
        assert np.mean(gaps) < 0.02


class TestCutMix:
    def test_empty_box(self):
        assert cutmix_labels(BBox.empty(), 10, 10) == (0.0, 1.0)

    def test_area_fraction_oracle(self, rng):
        for _ in range(100):
            W, H = rng.integers(1, 300, 2)
            box = sample_bbox(int(W), int(H), 1.0, rng)
            frac = Fraction(box.w * box.h, int(W * H))
            cs, sc = cutmix_labels(box, int(W), int(H))
            assert cs == float(frac)
            assert cs + sc == 1.0

    def test_images_match_bitmix(self, rng):
        pair = random_pair(rng, 16, 16)
        box = BBox(2, 3, 5, 7)
        a, b = bitmix_pair(pair, box), cutmix_pair(pair, box)
        assert np.array_equal(a.image_cs, b.image_cs) and np.array_equal(a.image_sc, b.image_sc)
        assert b.label_cs == 35 / 256

    def test_out_of_bounds(self):
        with pytest.raises(BoxOutOfBounds):
            cutmix_labels(BBox(0, 0, 11, 1), 10, 10)


class TestMixUp:
    @pytest.fixture
    def pair(self):
        return StegoPair(GrayImage(np.array([[10, 20], [30, 0]], np.uint8)), GrayImage(np.array([[11, 20], [29, 1]], np.uint8)))

    def test_zero_coefficient(self, pair):
        m = mixup_pair(pair, 0.0)
        assert np.array_equal(m.image_cs, pair.cover.pixels) and np.array_equal(m.image_sc, pair.stego.pixels)
        assert (m.label_cs, m.label_sc) == (0.0, 1.0)
        assert m.pixel_kind is PixelKind.FLOAT32 and m.image_cs.dtype == np.float32

    def test_half_is_symmetric(self, pair):
        m = mixup_pair(pair, 0.5)
        assert np.array_equal(m.image_cs, m.image_sc)

    def test_quarter_hand_computed(self, pair):
        m = mixup_pair(pair, 0.25)
        # 0.25 * S + 0.75 * C, pixel by pixel
        assert m.image_cs.tolist() == [[10.25, 20.0], [29.75, 0.25]]
        assert m.image_sc.tolist() == [[10.75, 20.0], [29.25, 0.75]]
        assert (m.label_cs, m.label_sc) == (0.25, 0.75)

    def test_bad_coefficient(self, pair):
        with pytest.raises(LabelOutOfRange):
            mixup_pair(pair, 1.5)


def _pairs(rng, n, size=16):
    return [random_pair(rng, size, size, 0.2) for _ in range(n)]


class TestAssembleBatch:
    def test_half_batch_rule(self, rng):
        pairs = _pairs(rng, 16)
        b = assemble_batch(pairs, MixConfig(gamma=0.25, method=Method.BITMIX, seed=1))
        assert b.images.shape == (32, 16, 16)
        methods = [r.method for r in b.provenance]
        assert methods == [Method.BITMIX] * 8 + [Method.NONE] * 8
        for i in range(8, 16):
            assert b.pair_labels(i) == (1.0, 0.0)
        for i in range(8):
            lab_c, lab_s = b.pair_labels(i)
            # default convention: clean cover = 1, so the C_S item carries 1 - lambda
            assert lab_s == pytest.approx(b.provenance[i].lam, abs=1e-7)
            assert np.float32(lab_c) + np.float32(lab_s) == np.float32(1.0)

    def test_method_none(self, rng):
        pairs = _pairs(rng, 5)
        b = assemble_batch(pairs, MixConfig(method="none", seed=2))
        assert b.labels.tolist() == [1.0] * 5 + [0.0] * 5
        for i, (p, r) in enumerate(zip(pairs, b.provenance)):
            assert r.method is Method.NONE and r.bbox == BBox.empty()
            assert np.array_equal(b.images[i], r.transform.apply_array(p.cover.pixels))
            assert np.array_equal(b.images[5 + i], r.transform.apply_array(p.stego.pixels))

    def test_deterministic(self, rng):
        pairs = _pairs(rng, 6)
        cfg = MixConfig(seed=42)
        assert assemble_batch(pairs, cfg) == assemble_batch(pairs, cfg)
        assert assemble_batch(pairs, cfg) != assemble_batch(pairs, MixConfig(seed=43))

    def test_compositional_oracle(self, rng):
        pairs = [random_pair(rng, 4, 4, 0.5) for _ in range(2)]
        b = assemble_batch(pairs, MixConfig(gamma=1.0, apply_fraction=1.0, seed=5))
        for i, (pair, rec) in enumerate(zip(pairs, b.provenance)):
            tp = StegoPair(apply_d4(pair.cover, rec.transform), apply_d4(pair.stego, rec.transform))
            m = bitmix_pair(tp, rec.bbox)
            assert np.array_equal(b.images[i], m.image_cs)
            assert np.array_equal(b.images[2 + i], m.image_sc)
            assert rec.lam == float(np.float32(m.lam))
            assert b.pair_labels(i) == (float(np.float32(1.0) - np.float32(m.lam)), float(np.float32(m.lam)))

    def test_stego_positive_convention(self, rng):
        pairs = _pairs(rng, 4)
        one = assemble_batch(pairs, MixConfig(seed=3, cover_label=1))
        zero = assemble_batch(pairs, MixConfig(seed=3, cover_label=0))
        assert np.array_equal(one.images, zero.images)
        assert np.array_equal(one.labels[:4], zero.labels[4:])
        assert zero.pair_labels(3) == (0.0, 1.0)
        assert zero.labels[0] == np.float32(zero.provenance[0].lam)

    def test_cutmix_and_mixup(self, rng):
        pairs = _pairs(rng, 4)
        cut = assemble_batch(pairs, MixConfig(method="cutmix", seed=8, apply_fraction=1.0))
        for i, r in enumerate(cut.provenance):
            assert r.lam == float(np.float32(r.bbox.area / 256))
        mix = assemble_batch(pairs, MixConfig(method="mixup", seed=8, gamma=0.25))
        assert mix.images.dtype == np.float32 and mix.pixel_kind is PixelKind.FLOAT32
        for r in mix.provenance[:2]:
            assert r.method is Method.MIXUP and 0.0 <= r.lam <= 0.25
        fixed = assemble_batch(pairs, MixConfig(method="mixup", seed=8, mixup_coefficient=0.5, apply_fraction=1.0))
        assert np.array_equal(fixed.images[:4], fixed.images[4:])

    def test_order_independent_per_key(self, rng):
        pairs = _pairs(rng, 5)
        cfg = MixConfig(seed=9, apply_fraction=1.0)
        fwd = assemble_batch(pairs, cfg, keys=[10, 11, 12, 13, 14])
        rev = assemble_batch(pairs[::-1], cfg, keys=[14, 13, 12, 11, 10])
        for i in range(5):
            j = 4 - i
            assert fwd.provenance[i] == rev.provenance[j]
            assert np.array_equal(fwd.images[i], rev.images[j])
            assert fwd.pair_labels(i) == rev.pair_labels(j)

    def test_apply_fraction_rounding(self, rng):
        pairs = _pairs(rng, 10)
        b = assemble_batch(pairs, MixConfig(seed=1, apply_fraction=0.3))
        assert sum(r.method is Method.BITMIX for r in b.provenance) == 3
        b = assemble_batch(pairs, MixConfig(seed=1, apply_fraction=0.0))
        assert all(r.method is Method.NONE for r in b.provenance)

    def test_non_square_keeps_shape(self, rng):
        pairs = [random_pair(rng, 12, 7) for _ in range(20)]
        b = assemble_batch(pairs, MixConfig(seed=2))
        assert b.images.shape == (40, 7, 12)
        assert {r.transform for r in b.provenance} <= {D4Transform.IDENTITY, D4Transform.ROT180, D4Transform.FLIPH, D4Transform.FLIPH_ROT180}

    def test_square_uses_all_eight(self, rng):
        pairs = _pairs(rng, 64, size=4)
        b = assemble_batch(pairs, MixConfig(seed=2))
        assert {r.transform for r in b.provenance} == set(D4Transform)

    def test_errors(self, rng):
        with pytest.raises(EmptyBatch):
            assemble_batch([], MixConfig())
        with pytest.raises(DimensionMismatch):
            assemble_batch([random_pair(rng, 4, 4), random_pair(rng, 5, 5)], MixConfig())
        with pytest.raises(ValueError):
            MixConfig(apply_fraction=1.5)
        with pytest.raises(ValueError):
            MixConfig(cover_label=2)

    def test_batch_validation(self):
        with pytest.raises(LabelOutOfRange):
            AugmentedBatch(np.zeros((2, 2, 2), np.uint8), np.array([1.5, 0.0]), ())
        with pytest.raises(ValueError):
            AugmentedBatch(np.zeros((3, 2, 2), np.uint8), np.zeros(3), ())


@given(st.floats(0.0, 1.0))
def test_float32_complement_sums_to_one(lam):
    a, b = float32_complement(lam)
    assert a + b == np.float32(1.0)
    assert 0 <= a <= 1 and 0 <= b <= 1


@given(st.integers(1, 10**6), st.data())
def test_float64_labels_sum_to_one(total, data):
    k = data.draw(st.integers(0, total))
    lam = k / total
    assert lam + (1.0 - lam) == 1.0
