"""Command-line front end.

Exit codes: 0 success, 1 data or runtime failure, 2 usage error.
Every command writes one JSON manifest next to its outputs.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from pathlib import Path
from typing import Sequence

import numpy as np

from bitmix import __version__
from bitmix.augment import Method, MixConfig, assemble_batch
from bitmix.batch_io import write_batch, write_csv_heatmap, write_csv_histogram, write_csv_lambda_long, write_csv_scores
from bitmix.errors import BitMixError, DegenerateOutput, NoSamplesInBand
from bitmix.image_core import GrayImage, load_pgm, save_pgm
from bitmix.rng import substream
from bitmix.stats import Histogram, ScoredSample, Truth, auc, modified_pixel_heatmap, p_e, sample_lambdas
from bitmix.stego_sim import EmbedSpec, Mode, StegoPair, bpp_to_change_rate, embed, synthetic_pairs

EMBED_RETRIES = 10


class DataError(Exception):
    """Input data problem; reported on stderr and mapped to exit code 1."""


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def name_key(name: str) -> int:
    """Stable 64-bit key for a file stem, used to address per-pair random substreams."""
    return int.from_bytes(hashlib.blake2b(name.encode("utf-8"), digest_size=8).digest(), "little")


class Manifest:
    def __init__(self, argv: Sequence[str], seed: int | None):
        self.argv = list(argv)
        self.seed = seed
        self.inputs: list[Path] = []
        self.outputs: list[Path] = []
        self._t0 = time.perf_counter()

    def write(self, path: Path) -> None:
        doc = {
            "tool": "bitmix",
            "tool_version": f"v{__version__}",
            "command": self.argv,
            "seed": self.seed,
            "inputs": [{"path": str(p), "sha256": _sha256(p)} for p in self.inputs],
            "outputs": [{"path": str(p), "sha256": _sha256(p)} for p in self.outputs],
            "wall_time_s": round(time.perf_counter() - self._t0, 6),
        }
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _err(msg: str) -> None:
    print(f"bitmix: {msg}", file=sys.stderr)


def _gamma(text: str) -> float:
    v = float(text)
    if not 0.0 < v <= 1.0:
        raise argparse.ArgumentTypeError(f"gamma must lie in (0, 1], got {text}")
    return v


def _gamma_list(text: str) -> list[float]:
    return [_gamma(t) for t in text.split(",") if t.strip()]


def _fraction(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in [0, 1], got {text}")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _band(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(t) for t in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"band must look like lo:hi, got {text}") from None
    if not 0.0 <= lo < hi <= 1.0:
        raise argparse.ArgumentTypeError(f"band needs 0 <= lo < hi <= 1, got {text}")
    return lo, hi


# --- pair loading --------------------------------------------------------


def load_pair_dir(pairs_dir: Path, manifest: Manifest | None = None) -> list[tuple[str, StegoPair]]:
    """Match ``<name>.cover.pgm`` with ``<name>.stego.pgm``; returns (name, pair) sorted by name."""
    if not pairs_dir.is_dir():
        raise DataError(f"{pairs_dir} is not a directory")
    covers = {p.name[: -len(".cover.pgm")]: p for p in pairs_dir.glob("*.cover.pgm")}
    stegos = {p.name[: -len(".stego.pgm")]: p for p in pairs_dir.glob("*.stego.pgm")}
    problems = [f"unpaired: {covers.get(n) or stegos.get(n)}" for n in sorted(covers.keys() ^ stegos.keys())]
    pairs = []
    for name in sorted(covers.keys() & stegos.keys()):
        try:
            cover = load_pgm(covers[name].read_bytes())
            stego = load_pgm(stegos[name].read_bytes())
            pairs.append((name, StegoPair(cover, stego)))
        except (OSError, BitMixError) as exc:
            problems.append(f"{name}: {exc}")
            continue
        if manifest is not None:
            manifest.inputs += [covers[name], stegos[name]]
    if pairs:
        shape = pairs[0][1].cover.shape
        problems += [f"{n}: size {p.width}x{p.height} differs from {shape[1]}x{shape[0]}" for n, p in pairs if p.cover.shape != shape]
    if problems:
        raise DataError("; ".join(problems))
    if not pairs:
        raise DataError(f"no *.cover.pgm / *.stego.pgm pairs in {pairs_dir}")
    return pairs


def _pair_source(args, manifest: Manifest) -> list[StegoPair]:
    if args.synthetic is not None:
        return synthetic_pairs(args.synthetic, args.pool_size, args.size, Mode(args.mode), args.seed)
    return [p for _, p in load_pair_dir(Path(args.pairs_dir), manifest)]


def _stem_path(out: Path, suffix: str) -> Path:
    return out.with_name(out.stem + suffix)


# --- commands ------------------------------------------------------------


def cmd_simulate(args, argv) -> int:
    covers_dir, out_dir = Path(args.covers_dir), Path(args.out_dir)
    rate = args.change_rate if args.change_rate is not None else bpp_to_change_rate(args.bpp)
    spec = EmbedSpec(rate, Mode(args.mode), args.window, args.seed)
    files = sorted(covers_dir.glob("*.pgm")) if covers_dir.is_dir() else []
    files = [f for f in files if not f.name.endswith((".cover.pgm", ".stego.pgm"))] or files
    if not files:
        _err(f"no PGM covers in {covers_dir}")
        return 1
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(argv, args.seed)
    failed = 0
    realized = []
    for f in files:
        stem = f.name[: -len(".pgm")]
        try:
            cover = load_pgm(f.read_bytes())
            for attempt in range(EMBED_RETRIES):
                try:
                    pair = embed(cover, spec, substream(args.seed, f"embed/{stem}", attempt))
                    break
                except DegenerateOutput:
                    continue
            else:
                raise DegenerateOutput(f"no pixel modified after {EMBED_RETRIES} seeds")
        except (OSError, BitMixError) as exc:
            _err(f"{f}: {exc}")
            failed += 1
            continue
        manifest.inputs.append(f)
        for kind, img in (("cover", pair.cover), ("stego", pair.stego)):
            path = out_dir / f"{stem}.{kind}.pgm"
            path.write_bytes(save_pgm(img))
            manifest.outputs.append(path)
        realized.append(pair.n_modified / (cover.width * cover.height))
    manifest.write(out_dir / "manifest.json")
    if realized:
        print(f"pairs={len(realized)} change_rate={rate:.6f} realized_mean={np.mean(realized):.6f}")
    return 1 if failed else 0


def cmd_augment(args, argv) -> int:
    manifest = Manifest(argv, args.seed)
    named = load_pair_dir(Path(args.pairs_dir), manifest)
    config = MixConfig(
        gamma=args.gamma,
        method=Method.parse(args.method),
        apply_fraction=args.apply_fraction,
        seed=args.seed,
        cover_label=args.cover_label,
        mixup_coefficient=args.mixup_coefficient,
    )
    order = substream(args.seed, "shuffle").permutation(len(named))
    named = [named[i] for i in order]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for b, start in enumerate(range(0, len(named), args.batch_size)):
        chunk = named[start : start + args.batch_size]
        batch = assemble_batch([p for _, p in chunk], config, keys=[name_key(n) for n, _ in chunk])
        path = out / f"batch_{b:04d}.bmix"
        with path.open("wb") as fh:
            write_batch(batch, fh)
        manifest.outputs.append(path)
    manifest.write(out / "manifest.json")
    print(f"pairs={len(named)} batches={len(manifest.outputs)} method={config.method.name.lower()}")
    return 0


def cmd_lambda_dist(args, argv) -> int:
    manifest = Manifest(argv, args.seed)
    source = _pair_source(args, manifest)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    histograms: dict[float, Histogram] = {}
    for i, gamma in enumerate(args.gamma):
        lams = sample_lambdas(source, gamma, args.samples, substream(args.seed, "lambda", i))
        h = Histogram.of(lams, args.bins)
        histograms[gamma] = h
        path = _stem_path(out, f"_gamma{gamma:g}.csv")
        with path.open("w", encoding="utf-8", newline="") as fh:
            write_csv_histogram(h, fh)
        manifest.outputs.append(path)
        print(f"gamma={gamma:g} n={h.total} P(lambda<0.1)={np.mean(lams < 0.1):.4f} mean={lams.mean():.4f}")
    with out.open("w", encoding="utf-8", newline="") as fh:
        write_csv_lambda_long(histograms, fh)
    manifest.outputs.append(out)
    manifest.write(_stem_path(out, ".manifest.json"))
    return 0


def read_scores(path: Path) -> list[ScoredSample]:
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"score", "truth"} <= set(reader.fieldnames):
            raise DataError(f"{path}: need columns score,truth")
        samples = []
        for line, row in enumerate(reader, start=2):
            token = (row["truth"] or "").strip().lower()
            try:
                truth = Truth(token)
            except ValueError:
                raise DataError(f"{path}:{line}: unknown truth {row['truth']!r} (want cover or stego)") from None
            try:
                samples.append(ScoredSample(float(row["score"]), truth))
            except (TypeError, ValueError) as exc:
                raise DataError(f"{path}:{line}: {exc}") from None
    return samples


def cmd_metrics(args, argv) -> int:
    manifest = Manifest(argv, None)
    scores = Path(args.scores_csv)
    samples = read_scores(scores)
    manifest.inputs.append(scores)
    pe, area = p_e(samples), auc(samples)
    print(f"P_E={pe:.4f} AUC={area:.4f}")
    out = Path(args.out) if args.out else scores.with_name(scores.stem + ".metrics.csv")
    n_stego = sum(s.truth is Truth.STEGO for s in samples)
    with out.open("w", encoding="utf-8", newline="") as fh:
        write_csv_scores({"n_cover": len(samples) - n_stego, "n_stego": n_stego, "p_e": pe, "auc": area}, fh)
    manifest.outputs.append(out)
    manifest.write(_stem_path(out, ".manifest.json"))
    return 0


def cmd_heatmap(args, argv) -> int:
    manifest = Manifest(argv, args.seed)
    source = _pair_source(args, manifest)
    try:
        hm = modified_pixel_heatmap(
            source, args.gamma, args.band, args.samples, substream(args.seed, "heatmap"), side=args.side, accept_target=args.accept
        )
    except NoSamplesInBand as exc:
        _err(f"{exc} (accepted 0 of {exc.attempts} draws)")
        return 1
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    csv_path, pgm_path = out.with_name(out.name + ".csv"), out.with_name(out.name + ".pgm")
    with csv_path.open("w", encoding="utf-8", newline="") as fh:
        write_csv_heatmap(hm, fh)
    pgm_path.write_bytes(save_pgm(hm.to_image()))
    manifest.outputs += [csv_path, pgm_path]
    manifest.write(out.with_name(out.name + ".manifest.json"))
    inner, outer = hm.region_means(args.border)
    print(f"accepted={hm.accepted} inner_mean={inner:.6g} outer_mean={outer:.6g} inner/outer={inner / outer if outer else float('inf'):.4f}")
    return 0


# --- parser --------------------------------------------------------------


def _add_source(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("pairs_dir", nargs="?", help="directory of <name>.cover.pgm / <name>.stego.pgm")
    src.add_argument("--synthetic", type=float, metavar="RHO", help="use simulated pairs with this change rate")
    p.add_argument("--pool-size", type=_positive_int, default=64, help="number of synthetic pairs (default 64)")
    p.add_argument("--size", type=_positive_int, default=256, help="synthetic image side (default 256)")
    p.add_argument("--mode", choices=[m.value for m in Mode], default="uniform")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bitmix", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"bitmix v{__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="embed simulated +-1 changes into PGM covers")
    p.add_argument("covers_dir")
    p.add_argument("out_dir")
    rate = p.add_mutually_exclusive_group(required=True)
    rate.add_argument("--bpp", type=float, help="payload in bits per pixel, mapped to a change rate")
    rate.add_argument("--change-rate", type=float, help="fraction of pixels to modify")
    p.add_argument("--mode", choices=[m.value for m in Mode], default="uniform")
    p.add_argument("--window", type=int, default=3, help="local-variance window for adaptive mode")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("augment", help="assemble mixed mini-batches into BMIX containers")
    p.add_argument("pairs_dir")
    p.add_argument("--gamma", type=_gamma, default=0.25, help="maximum mix ratio (default 0.25)")
    p.add_argument("--method", choices=[m.name.lower() for m in Method], default="bitmix")
    p.add_argument("--batch-size", type=_positive_int, default=16, help="pairs per batch (default 16)")
    p.add_argument("--apply-fraction", type=_fraction, default=0.5)
    p.add_argument("--cover-label", type=int, choices=(0, 1), default=1, help="hard label of a clean cover (default 1)")
    p.add_argument("--mixup-coefficient", type=_fraction, default=None, help="fixed MixUp weight; default Unif(0, gamma)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("lambda-dist", help="histogram the modified-pixel ratio for several gammas")
    _add_source(p)
    p.add_argument("--gamma", type=_gamma_list, default=[1.0, 0.75, 0.5, 0.25], help="comma-separated list")
    p.add_argument("--samples", type=_positive_int, default=10000)
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="combined CSV path; per-gamma CSVs go next to it")
    p.set_defaults(func=cmd_lambda_dist)

    p = sub.add_parser("metrics", help="P_E and AUC from a score,truth CSV")
    p.add_argument("scores_csv")
    p.add_argument("--out", help="summary CSV (default <scores>.metrics.csv)")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("heatmap", help="spatial density of modified pixels in mixed outputs")
    _add_source(p)
    p.add_argument("--gamma", type=_gamma, default=0.25)
    p.add_argument("--band", type=_band, default=(0.85, 0.95), help="ratio band lo:hi (default 0.85:0.95)")
    p.add_argument("--side", choices=("sc", "cs"), default="sc", help="count modifications in S_C or C_S")
    p.add_argument("--samples", type=_positive_int, default=100000, help="maximum draws")
    p.add_argument("--accept", type=_positive_int, default=None, help="stop after this many accepted draws")
    p.add_argument("--border", type=float, default=0.25, help="border fraction for the inner/outer summary")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output prefix; writes <out>.csv and <out>.pgm")
    p.set_defaults(func=cmd_heatmap)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command in ("lambda-dist",) and args.bins < 2:
        parser.print_usage(sys.stderr)
        _err("--bins must be >= 2")
        return 2
    if args.command == "simulate":
        try:
            EmbedSpec(args.change_rate if args.change_rate is not None else bpp_to_change_rate(args.bpp), Mode(args.mode), args.window)
        except BitMixError as exc:
            parser.print_usage(sys.stderr)
            _err(str(exc))
            return 2
    try:
        return args.func(args, ["bitmix", *argv])
    except DataError as exc:
        _err(str(exc))
        return 1
    except (OSError, BitMixError) as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
