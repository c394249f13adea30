"""Time batch assembly + serialization for a given number of pairs."""

import argparse
import io
import time

from bitmix.augment import MixConfig, Method, assemble_batch
from bitmix.batch_io import write_batch
from bitmix.stego_sim import bpp_to_change_rate, synthetic_pairs


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--pairs", type=int, default=1000)
    ap.add_argument("--pool", type=int, default=50)
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--batch-size", type=int, default=16)
    ap.add_argument("--method", default="bitmix")
    ap.add_argument("--gamma", type=float, default=0.25)
    args = ap.parse_args()

    pool = synthetic_pairs(bpp_to_change_rate(0.4), args.pool, args.size)
    cfg = MixConfig(gamma=args.gamma, method=Method.parse(args.method))
    t0 = time.perf_counter()
    total = 0
    for start in range(0, args.pairs, args.batch_size):
        keys = range(start, min(start + args.batch_size, args.pairs))
        batch = assemble_batch([pool[k % len(pool)] for k in keys], cfg, list(keys))
        total += write_batch(batch, io.BytesIO())
    dt = time.perf_counter() - t0
    print(f"pairs={args.pairs} bytes={total} seconds={dt:.3f} pairs_per_s={args.pairs / dt:.0f}")


if __name__ == "__main__":
    main()
