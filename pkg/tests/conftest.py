import numpy as np
import pytest
from hypothesis import strategies as st

from bitmix.image_core import GrayImage
from bitmix.stego_sim import StegoPair


@st.composite
def gray_images(draw, min_side=1, max_side=12):
    w = draw(st.integers(min_side, max_side))
    h = draw(st.integers(min_side, max_side))
    data = draw(st.binary(min_size=w * h, max_size=w * h))
    return GrayImage(np.frombuffer(data, dtype=np.uint8).reshape(h, w))


@st.composite
def stego_pairs(draw, min_side=1, max_side=12):
    cover = draw(gray_images(min_side, max_side))
    n = cover.width * cover.height
    flips = draw(st.lists(st.integers(0, n - 1), min_size=1, max_size=n, unique=True))
    px = cover.pixels.astype(np.int16).ravel()
    for i in flips:
        px[i] = px[i] + 1 if px[i] < 255 else 254
    return StegoPair(cover, GrayImage(px.reshape(cover.shape).astype(np.uint8)))


def random_pair(rng: np.random.Generator, w: int, h: int, rate: float = 0.1) -> StegoPair:
    """Random cover, +-1 changes at ``rate``, at least one change guaranteed."""
    cover = rng.integers(0, 256, size=(h, w), dtype=np.int16)
    change = rng.random((h, w)) < rate
    change.flat[rng.integers(h * w)] = True
    sign = np.where(rng.random((h, w)) < 0.5, -1, 1)
    sign[cover == 0] = 1
    sign[cover == 255] = -1
    stego = cover + sign * change
    return StegoPair(GrayImage(cover.astype(np.uint8)), GrayImage(stego.astype(np.uint8)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
