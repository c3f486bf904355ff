"""Command-line front end: simulate / demosaic / account / metrics /
bench / check.

Exit codes: 0 success, 1 usage error, 2 data or file-format error,
3 verification failure.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import bench as bench_mod
from . import checks, imageio, simulator
from .costs import account, compare_costs, psnr, ssim
from .params import WeightFormatError
from .pipeline import (Model, ModelConfig, format_config, load_weights,
                       parse_config_file, run_pipeline, run_pipeline_tiled)
from .tensor_ops import NumericsError, ShapeError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_VERIFY = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; the CLI contract reserves 2 for data
    # errors and uses 1 for usage
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _write_manifest(out_path: str, payload: dict) -> None:
    path = os.path.splitext(out_path)[0] + ".manifest.json"
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def _load_config(path: str | None) -> ModelConfig:
    return parse_config_file(path) if path else ModelConfig()


def cmd_simulate(args) -> int:
    rgb = imageio.read_rgb(args.input)
    raw, mask, _ = simulator.synthesize_pair(
        rgb, args.seed, args.event_density,
        pattern=simulator.pattern_by_name(args.pattern),
        noise_sigma=args.noise_sigma)
    imageio.write_pgm16(args.output, raw)
    mask_path = os.path.splitext(args.output)[0] + ".mask"
    imageio.write_mask(mask_path, mask.mask)
    print(f"pattern = {args.pattern}, seed = {args.seed}, "
          f"event_density = {args.event_density}, "
          f"noise_sigma = {args.noise_sigma}")
    print(f"wrote {args.output} ({raw.shape[0]}x{raw.shape[1]}) "
          f"and {mask_path} ({int(mask.mask.sum())} events)")
    _write_manifest(args.output, {
        "command": "simulate", "input": args.input, "output": args.output,
        "mask": mask_path, "seed": args.seed, "pattern": args.pattern,
        "event_density": args.event_density, "noise_sigma": args.noise_sigma,
        "height": int(raw.shape[0]), "width": int(raw.shape[1]),
        "events": int(mask.mask.sum()),
    })
    return EXIT_OK


def cmd_demosaic(args) -> int:
    cfg = _load_config(args.config)
    raw = imageio.read_pgm16(args.raw)
    mask = imageio.read_mask(args.mask)
    if mask.shape != raw.shape[:2]:
        raise ShapeError(f"mask {mask.shape} does not match raw "
                         f"{raw.shape[:2]}")
    print(format_config(cfg))
    if args.bilinear:
        print("method = classical bilinear interpolation (no network)")
        rgb = simulator.bilinear_demosaic(raw, simulator.quad_bayer(),
                                          mask=mask)
    else:
        if args.weights:
            model = Model.from_weights(cfg, load_weights(args.weights))
            print(f"weights = {args.weights}")
        else:
            model = Model.initialize(cfg, args.seed)
            print(f"weights = none; using seeded random init (seed = "
                  f"{args.seed}) — output is a plumbing check, not a "
                  f"restoration")
        if args.tile:
            rgb = run_pipeline_tiled(model, raw, mask, args.tile)
        else:
            rgb = run_pipeline(model, raw, mask)
    imageio.write_rgb_png(args.output, rgb)
    print(f"wrote {args.output}")
    _write_manifest(args.output, {
        "command": "demosaic", "raw": args.raw, "mask": args.mask,
        "output": args.output, "config": args.config,
        "weights": args.weights, "bilinear": bool(args.bilinear),
        "tile": args.tile, "seed": args.seed,
    })
    return EXIT_OK


def cmd_account(args) -> int:
    cfg = _load_config(args.config)
    h, w = (int(v) for v in args.resolution.lower().split("x"))
    print(format_config(cfg))
    rep = account(cfg, (h, w))
    print(rep.summary())
    if args.csv:
        with open(args.csv, "w") as f:
            f.write(rep.to_csv())
        print(f"wrote {args.csv}")
    else:
        print(rep.to_csv(), end="")
    if args.compare:
        other = account(parse_config_file(args.compare), (h, w))
        cmp = compare_costs(other, rep)
        print(f"vs {args.compare}: param reduction = "
              f"{cmp['param_reduction_pct']:.1f}%, "
              f"ops reduction = {cmp['ops_reduction_pct']:.1f}%")
    return EXIT_OK


def _read_any(path: str) -> np.ndarray:
    if path.lower().endswith(".pgm"):
        return np.repeat(imageio.read_pgm16(path), 3, axis=2)
    return imageio.read_rgb(path)


def cmd_metrics(args) -> int:
    a, b = _read_any(args.a), _read_any(args.b)
    if a.shape != b.shape:
        raise ShapeError(f"image shapes differ: {a.shape} vs {b.shape}")
    print(f"{psnr(a, b):.2f} dB, {ssim(a, b):.4f}")
    return EXIT_OK


def cmd_bench(args) -> int:
    sizes = tuple(int(s) for s in args.sizes.split(","))
    if args.kernel == "xnor-gemm":
        rows = bench_mod.bench_xnor_gemm(sizes)
        print(bench_mod.format_xnor_table(rows))
        worst = min(r["speedup"] for r in rows)
        print(f"min speedup = {worst:.1f}x")
        if worst < 1.0:
            print("FAIL: packed kernel slower than float baseline")
            return EXIT_VERIFY
    else:
        print(bench_mod.format_scan_table(bench_mod.bench_scan(sizes)))
    return EXIT_OK


def cmd_check(args) -> int:
    results = checks.run_suites(args.suite, seed=args.seed)
    failed = 0
    for suite, name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {suite:8s} {name} ({detail})")
        failed += not ok
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_VERIFY if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bitmosaic",
                description="Binarized Mamba-Transformer demosaicing for "
                            "Quad Bayer HybridEVS RAW images.")
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("simulate", help="RGB -> degraded RAW + event mask")
    s.add_argument("--input", required=True)
    s.add_argument("--output", required=True, help="16-bit PGM path")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--event-density", type=float, default=0.0625)
    s.add_argument("--noise-sigma", type=float, default=0.0)
    s.add_argument("--pattern", default="quad", choices=["quad", "bayer"])
    s.set_defaults(fn=cmd_simulate)

    s = sub.add_parser("demosaic", help="RAW + mask -> RGB PNG")
    s.add_argument("--raw", required=True)
    s.add_argument("--mask", required=True)
    s.add_argument("--output", required=True)
    s.add_argument("--config", default=None)
    s.add_argument("--weights", default=None)
    s.add_argument("--seed", type=int, default=0,
                   help="random-init seed when no weights are given")
    s.add_argument("--tile", type=int, default=None)
    s.add_argument("--bilinear", action="store_true",
                   help="classical bilinear baseline instead of the network")
    s.set_defaults(fn=cmd_demosaic)

    s = sub.add_parser("account", help="parameter/ops accounting")
    s.add_argument("--config", default=None)
    s.add_argument("--resolution", default="256x256")
    s.add_argument("--csv", default=None)
    s.add_argument("--compare", default=None,
                   help="second config file to diff against")
    s.set_defaults(fn=cmd_account)

    s = sub.add_parser("metrics", help="PSNR/SSIM between two images")
    s.add_argument("--a", required=True)
    s.add_argument("--b", required=True)
    s.set_defaults(fn=cmd_metrics)

    s = sub.add_parser("bench", help="kernel microbenchmarks")
    s.add_argument("--kernel", default="xnor-gemm",
                   choices=["xnor-gemm", "scan"])
    s.add_argument("--sizes", default="256,1024,4096")
    s.set_defaults(fn=cmd_bench)

    s = sub.add_parser("check", help="run self-check property suites")
    s.add_argument("--suite", default="all",
                   choices=["all"] + sorted(checks.SUITES))
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(fn=cmd_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (OSError, ValueError, ShapeError, NumericsError,
            WeightFormatError, imageio.FileFormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
