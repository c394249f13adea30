"""Heatmaps of modifications surviving the swap, written as PGM + CSV."""

import argparse
from pathlib import Path

import numpy as np

from bitmix.batch_io import write_csv_heatmap
from bitmix.image_core import save_pgm
from bitmix.stats import modified_pixel_heatmap
from bitmix.stego_sim import bpp_to_change_rate, synthetic_pairs

SETTINGS = [
    # gamma, band, side
    (1.0, (0.85, 0.95), "sc"),
    (0.25, (0.05, 0.15), "sc"),
    (0.25, (0.05, 0.15), "cs"),
]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("heatmaps"))
    ap.add_argument("--accept", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    pool = synthetic_pairs(bpp_to_change_rate(0.4), 32, 256, seed=args.seed)
    for i, (gamma, band, side) in enumerate(SETTINGS):
        hm = modified_pixel_heatmap(pool, gamma, band, 10**7, np.random.default_rng([args.seed, i]), side=side, accept_target=args.accept)
        inner, outer = hm.region_means()
        stem = args.out / f"gamma{gamma:g}_{band[0]:g}-{band[1]:g}_{side}"
        stem.with_suffix(".pgm").write_bytes(save_pgm(hm.to_image()))
        with open(stem.with_suffix(".csv"), "w", newline="") as fh:
            write_csv_heatmap(hm, fh)
        print(f"gamma={gamma:g} band={band} side={side} accepted={hm.accepted} inner={inner:.5f} outer={outer:.5f} ratio={inner / outer:.3f}")


if __name__ == "__main__":
    main()
