"""BitMix: cover-stego patch swapping with embedding-adaptive soft labels."""

__version__ = "0.1.0"

from bitmix.errors import BitMixError
from bitmix.image_core import D4Transform, GrayImage, apply_d4, diff_count, diff_mask, load_pgm, save_pgm
from bitmix.stego_sim import EmbedSpec, Mode, StegoPair, bpp_to_change_rate, embed, embed_adaptive, embed_uniform
from bitmix.augment import (
    AugmentedBatch,
    BBox,
    Method,
    MixConfig,
    MixedPair,
    assemble_batch,
    bitmix_pair,
    cutmix_labels,
    cutmix_pair,
    mixup_pair,
    sample_bbox,
)
from bitmix.stats import Histogram, Heatmap, ScoredSample, auc, lambda_distribution, modified_pixel_heatmap, p_e

__all__ = [
    "AugmentedBatch",
    "BBox",
    "BitMixError",
    "D4Transform",
    "EmbedSpec",
    "GrayImage",
    "Heatmap",
    "Histogram",
    "Method",
    "MixConfig",
    "MixedPair",
    "Mode",
    "ScoredSample",
    "StegoPair",
    "apply_d4",
    "assemble_batch",
    "auc",
    "bitmix_pair",
    "bpp_to_change_rate",
    "cutmix_labels",
    "cutmix_pair",
    "diff_count",
    "diff_mask",
    "embed",
    "embed_adaptive",
    "embed_uniform",
    "lambda_distribution",
    "load_pgm",
    "mixup_pair",
    "modified_pixel_heatmap",
    "p_e",
    "sample_bbox",
    "save_pgm",
]
