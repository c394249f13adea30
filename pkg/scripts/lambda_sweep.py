"""Ratio distribution over a gamma sweep and two payloads, printed as a table."""

import argparse

import numpy as np

from bitmix.stats import lambda_distribution, total_variation
from bitmix.stego_sim import bpp_to_change_rate, synthetic_pairs


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--pool", type=int, default=32)
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--samples", type=int, default=10_000)
    ap.add_argument("--bins", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    gammas = (1.0, 0.75, 0.5, 0.25)
    hists = {}
    for bpp in (0.4, 0.1):
        rho = bpp_to_change_rate(bpp)
        pool = synthetic_pairs(rho, args.pool, args.size, seed=args.seed)
        for g in gammas:
            rng = np.random.default_rng([args.seed, int(bpp * 10), int(g * 100)])
            hists[bpp, g] = lambda_distribution(pool, g, args.samples, args.bins, rng)

    print(f"{'bpp':>5} {'gamma':>6} {'P(lam<0.1)':>11} {'mode bin':>9}")
    for (bpp, g), h in hists.items():
        p_low = h.frequencies[h.bin_edges[1:] <= 0.1 + 1e-12].sum()
        top = int(np.argmax(h.counts))
        print(f"{bpp:5.1f} {g:6.2f} {p_low:11.4f} {h.bin_edges[top]:5.2f}-{h.bin_edges[top + 1]:.2f}")
    print()
    for g in gammas:
        print(f"TV(0.4 bpp, 0.1 bpp) at gamma={g:g}: {total_variation(hists[0.4, g], hists[0.1, g]):.4f}")


if __name__ == "__main__":
    main()
