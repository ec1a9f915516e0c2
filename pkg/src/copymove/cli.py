"""Command-line interface.

Subcommands: detect, evaluate, generate, sweep, selftest. Every run echoes
its effective configuration into the output directory as ``config.json``.
Exit codes: 0 success, 1 usage error, 2 I/O error, 3 internal invariant
violation.
"""

import argparse
import logging
import os
import sys

import numpy as np
from PIL import UnidentifiedImageError

from . import __version__
from .binio import save_raster_f32
from .config import RunConfig
from .imgproc import apply_attack, load_image, save_image
from .kernels import BACKEND
from .maskgen import load_class_mask, overlay, save_binary_mask
from .metrics import (
    binary_metrics,
    canonical_stem,
    evaluate_dirs,
    format_eval_table,
    mean_metrics,
    write_eval_tsv,
)
from .patchmatch import InvariantError
from .pipeline import run_detector
from .rng import derive_key
from .synthimage import textured_image

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_INTERNAL = 3

log = logging.getLogger("copymove")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _pair(cast):
    def parse(text):
        parts = text.split(",")
        if len(parts) != 2:
            raise argparse.ArgumentTypeError(f"expected lo,hi - got {text!r}")
        return (cast(parts[0]), cast(parts[1]))

    return parse


def _int_list(text):
    return tuple(int(p) for p in text.split(",") if p)


# flag name -> (config key, argparse kwargs)
_CONFIG_FLAGS = [
    ("--seed", "seed", dict(type=int)),
    ("--iterations", "iterations", dict(type=int)),
    ("--beta", "beta", dict(type=float)),
    ("--search-radius", "search_radius", dict(type=float)),
    ("--min-offset-norm", "min_offset_norm", dict(type=float)),
    ("--enforce-min-norm", "enforce_min_norm", dict(action=argparse.BooleanOptionalAction)),
    ("--cross-scale", "cross_scale", dict(action=argparse.BooleanOptionalAction)),
    ("--patch-radius", "patch_radius", dict(type=int)),
    ("--conv-weights", "conv_weights", dict(type=str)),
    ("--dlf-radii", "dlf_radii", dict(type=_int_list, metavar="R1,R2,...")),
    ("--eps-threshold", "eps_threshold", dict(type=float)),
    ("--min-region-px", "min_region_px", dict(type=int)),
    ("--consistency-tol", "consistency_tol", dict(type=float)),
    ("--median-radius", "median_radius", dict(type=int)),
    ("--gen-vertices", "gen_vertices", dict(type=_pair(int), metavar="LO,HI")),
    ("--gen-area-frac", "gen_area_frac", dict(type=_pair(float), metavar="LO,HI")),
    ("--gen-angle", "gen_angle", dict(type=_pair(float), metavar="LO,HI")),
    ("--gen-scale", "gen_scale", dict(type=_pair(float), metavar="LO,HI")),
    ("--gen-regions", "gen_regions", dict(type=_pair(int), metavar="LO,HI")),
    ("--gen-resize", "gen_resize", dict(type=int)),
]


def _add_config_flags(sub):
    sub.add_argument("--config", help="JSON config file; flags override its values")
    for flag, key, kwargs in _CONFIG_FLAGS:
        sub.add_argument(flag, dest=key, default=None, **kwargs)


def _build_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides = {key: getattr(args, key) for _, key, _ in _CONFIG_FLAGS if getattr(args, key) is not None}
    return cfg.replace(**overrides)


def _build_parser() -> _Parser:
    parser = _Parser(prog="copymove", description="Copy-move forgery localization")
    parser.add_argument("--version", action="version", version=f"copymove {__version__} ({BACKEND} backend)")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("detect", parents=[], help="localize copy-move regions in one image")
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)

    p = subs.add_parser("evaluate", help="score predicted masks against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", default=None, help="output dir (default: pred dir)")

    p = subs.add_parser("generate", help="generate a forged corpus with ground truth")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--src", default=None, help="directory of source images")
    p.add_argument("--synthetic", type=int, default=0, metavar="K",
                   help="use K procedurally textured source images instead of --src")
    p.add_argument("--synthetic-size", type=int, default=256)
    _add_config_flags(p)

    p = subs.add_parser("sweep", help="re-detect a corpus under degradation attacks")
    p.add_argument("--corpus", required=True, help="directory with *_forged.png and *_truth.png")
    p.add_argument("--attacks", default="none,noise:0.02,noise:0.05,jpeg:80,jpeg:60",
                   help="comma-separated: none | jpeg:Q | noise:SIGMA")
    p.add_argument("--out", required=True)
    p.add_argument("--limit", type=int, default=0, help="use only the first N corpus images")
    _add_config_flags(p)

    subs.add_parser("selftest", help="run built-in sanity checks")
    return parser


def _cmd_detect(args) -> int:
    cfg = _build_config(args)
    os.makedirs(args.out, exist_ok=True)
    img = load_image(args.image)
    result = run_detector(img, cfg)
    stem = os.path.splitext(os.path.basename(args.image))[0]
    save_binary_mask(os.path.join(args.out, f"{stem}_mask.png"), result.mask)
    save_image(os.path.join(args.out, f"{stem}_overlay.png"), overlay(img, result.mask))
    save_raster_f32(os.path.join(args.out, f"{stem}_field_zm.f32"), result.field_zm)
    save_raster_f32(os.path.join(args.out, f"{stem}_err_zm.f32"), result.err_zm)
    if result.field_conv is not None:
        save_raster_f32(os.path.join(args.out, f"{stem}_field_conv.f32"), result.field_conv)
        save_raster_f32(os.path.join(args.out, f"{stem}_err_conv.f32"), result.err_conv)
    cfg.save(args.out)
    print(f"{args.image}: flagged {result.flagged_fraction:.2%} of pixels -> {args.out}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    out_dir = args.out or args.pred
    os.makedirs(out_dir, exist_ok=True)
    rows, summary, missing = evaluate_dirs(args.pred, args.truth)
    print(format_eval_table(rows, summary, missing))
    write_eval_tsv(os.path.join(out_dir, "eval.tsv"), rows, summary)
    return EXIT_OK


def _cmd_generate(args) -> int:
    from .forgegen import generate_corpus

    cfg = _build_config(args)
    if bool(args.src) == bool(args.synthetic):
        raise _UsageError("generate needs exactly one of --src or --synthetic")
    if args.synthetic:
        size = args.synthetic_size
        sources = [
            (f"synthetic{i:03d}", textured_image(derive_key(cfg.seed, 0x5E, i), size, size))
            for i in range(args.synthetic)
        ]
    else:
        sources = args.src
    os.makedirs(args.out, exist_ok=True)
    manifest = generate_corpus(sources, args.n, cfg.forgery_spec(), args.out, resize_px=cfg.gen_resize)
    cfg.save(args.out)
    print(f"wrote {args.n} forged/truth pairs to {args.out} (manifest: {manifest})")
    return EXIT_OK


def _corpus_pairs(corpus_dir):
    forged = {}
    truth = {}
    for f in sorted(os.listdir(corpus_dir)):
        if not f.lower().endswith(".png"):
            continue
        stem = canonical_stem(f)
        if "_truth" in f or "_gt" in f:
            truth[stem] = os.path.join(corpus_dir, f)
        elif "_forged" in f:
            forged[stem] = os.path.join(corpus_dir, f)
    stems = sorted(set(forged) & set(truth))
    return [(s, forged[s], truth[s]) for s in stems]


def _cmd_sweep(args) -> int:
    cfg = _build_config(args)
    attacks = [a.strip() for a in args.attacks.split(",") if a.strip()]
    if not attacks:
        raise _UsageError("no attacks given")
    pairs = _corpus_pairs(args.corpus)
    if args.limit:
        pairs = pairs[: args.limit]
    if not pairs:
        raise _UsageError(f"no forged/truth pairs found in {args.corpus}")
    os.makedirs(args.out, exist_ok=True)
    lines = ["attack\timages\tmean_precision\tmean_recall\tmean_f1"]
    print(f"{'attack':<14} {'images':>6} {'precision':>10} {'recall':>10} {'f1':>10}")
    for ai, attack in enumerate(attacks):
        per_image = []
        for ii, (stem, forged_path, truth_path) in enumerate(pairs):
            img = apply_attack(load_image(forged_path), attack, seed=derive_key(cfg.seed, ai, ii))
            result = run_detector(img, cfg)
            truth_mask = load_class_mask(truth_path).binary()
            per_image.append(binary_metrics(result.mask, truth_mask))
        agg = mean_metrics(per_image)
        lines.append(f"{attack}\t{len(per_image)}\t{agg.precision:.6f}\t{agg.recall:.6f}\t{agg.f1:.6f}")
        print(f"{attack:<14} {len(per_image):>6} {agg.precision:>10.4f} {agg.recall:>10.4f} {agg.f1:>10.4f}")
    from .binio import atomic_write_text

    atomic_write_text(os.path.join(args.out, "sweep.tsv"), "\n".join(lines) + "\n")
    cfg.save(args.out)
    return EXIT_OK


def _cmd_selftest(args) -> int:
    from . import selftest

    return EXIT_OK if selftest.run() else EXIT_INTERNAL


_COMMANDS = {
    "detect": _cmd_detect,
    "evaluate": _cmd_evaluate,
    "generate": _cmd_generate,
    "sweep": _cmd_sweep,
    "selftest": _cmd_selftest,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError,) as exc:
        # bad parameter values reaching validation count as usage errors
        print(f"invalid arguments: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, UnidentifiedImageError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (InvariantError, np.linalg.LinAlgError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
