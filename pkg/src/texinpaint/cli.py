"""Command-line front end: parse a job, run the pipeline, write outputs.

Exit codes: 0 success, 2 usage error, 3 I/O error, 4 pipeline error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .image import RegionSpec, read_mask_png, read_png, write_png
from .network import (DEFAULT_STATISTICS_LAYERS, load_weights, random_network,
                      vgg19_topology)
from .pipeline import DEFAULT_DELTA, DEFAULT_EXPAND, InpaintJob, inpaint
from .statistics import LossWeights

# key -> (parser, default); flag > config file > default
_SCHEMA = {
    "patch_size": (int, 256),
    "overlap": (int, None),            # None: patch_size // 4
    "q": (int, 2),
    "stride": (int, 64),
    "ws": (float, 1e6),
    "wcc": (float, 1e7),
    "wd": (float, 1.0),
    "wg": (float, 0.05),
    "wb": (float, 10.0),
    "coarse_iters": (int, 200),
    "fine_iters": (int, 400),
    "detail_layers": (str, ",".join(DEFAULT_STATISTICS_LAYERS)),
    "global_layers": (str, ",".join(DEFAULT_STATISTICS_LAYERS)),
    "delta": (str, ",".join(map(str, DEFAULT_DELTA))),
    "expand": (str, ",".join(map(str, DEFAULT_EXPAND))),
    "seed": (int, 0),
    "psi_band": (int, 16),
    "greyscale_init": (lambda s: s.lower() not in ("0", "false", "no"), True),
    "random_widths": (str, "8,8,16,16,16"),
}


def _build_parser():
    p = argparse.ArgumentParser(
        prog="texinpaint",
        description="Inpaint a rectangular hole by patch-wise CNN texture "
                    "synthesis.")
    p.add_argument("--image", help="input PNG")
    p.add_argument("--mask", help="hole mask PNG (pixel >= 128 means hole)")
    p.add_argument("--weights", help="TXW1 weight file")
    p.add_argument("--random-weights", type=int, metavar="SEED",
                   help="use a seeded random filter bank instead of a "
                        "weight file")
    p.add_argument("--out", help="output PNG path")
    p.add_argument("--dump-dir", help="directory for intermediate dumps")
    p.add_argument("--report", help="write the run log to this file")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--print-config", action="store_true",
                   help="echo every resolved setting and exit")
    p.add_argument("--no-greyscale-init", action="store_true",
                   help="skip the greyscale conversion after the coarse pass")
    for key, (_, default) in _SCHEMA.items():
        if key in ("greyscale_init",):
            continue
        p.add_argument("--" + key.replace("_", "-"),
                       default=None, metavar=key.upper(),
                       help=f"default: {default}")
    return p


def _parse_config_file(path):
    values = {}
    with open(path) as f:
        for ln, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{ln}: expected key=value")
            key, val = line.split("=", 1)
            key = key.strip().replace("-", "_")
            if key not in _SCHEMA:
                raise ValueError(f"{path}:{ln}: unknown key {key!r}")
            values[key] = val.strip()
    return values


def _resolve(args):
    cfg = {k: d for k, (_, d) in _SCHEMA.items()}
    if args.config:
        for k, raw in _parse_config_file(args.config).items():
            cfg[k] = _SCHEMA[k][0](raw)
    for k in _SCHEMA:
        if k == "greyscale_init":
            continue
        flag = getattr(args, k, None)
        if flag is not None:
            cfg[k] = _SCHEMA[k][0](flag)
    if args.no_greyscale_init:
        cfg["greyscale_init"] = False
    if cfg["overlap"] is None:
        cfg["overlap"] = cfg["patch_size"] // 4
    return cfg


def _ints(s):
    return tuple(int(v) for v in str(s).split(","))


def _print_config(cfg, out=None):
    out = sys.stdout if out is None else out
    for key in _SCHEMA:
        val = cfg[key]
        if isinstance(val, bool):
            val = "true" if val else "false"
        print(f"{key}={val}", file=out)


def run(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if e.code is not None else 2

    try:
        cfg = _resolve(args)
    except (ValueError, OSError) as e:
        print(f"error code=2 stage=config: {e}", file=sys.stderr)
        return 2

    if args.print_config:
        _print_config(cfg)
        return 0

    if not args.image or not args.mask or not args.out:
        parser.print_usage(sys.stderr)
        print("error code=2 stage=config: --image, --mask and --out are "
              "required", file=sys.stderr)
        return 2
    if (args.weights is None) == (args.random_weights is None):
        print("error code=2 stage=config: exactly one of --weights / "
              "--random-weights is required", file=sys.stderr)
        return 2

    try:
        img = read_png(args.image)
        hole = read_mask_png(args.mask)
    except OSError as e:
        print(f"error code=3 stage=input: {e}", file=sys.stderr)
        return 3

    detail_layers = tuple(cfg["detail_layers"].split(","))
    global_layers = tuple(cfg["global_layers"].split(","))
    try:
        if args.weights is not None:
            net = load_weights(args.weights)
        else:
            widths = _ints(cfg["random_widths"])
            net = random_network(args.random_weights, vgg19_topology(widths))
    except OSError as e:
        print(f"error code=3 stage=weights: {e}", file=sys.stderr)
        return 3
    except ValueError as e:
        print(f"error code=4 stage=weights: {e}", file=sys.stderr)
        return 4

    try:
        if not hole.any():
            out_img, report = img, None
        else:
            ys, xs = np.nonzero(hole)
            omega = (int(xs.min()), int(ys.min()),
                     int(xs.max() - xs.min() + 1), int(ys.max() - ys.min() + 1))
            region = RegionSpec(omega, cfg["psi_band"],
                                (img.width, img.height))
            job = InpaintJob(
                image=img, region=region, network=net,
                weights=LossWeights(ws=cfg["ws"], wcc=cfg["wcc"],
                                    wd=cfg["wd"], wg=cfg["wg"], wb=cfg["wb"]),
                q=cfg["q"], patch_size=cfg["patch_size"],
                overlap=cfg["overlap"], stride=cfg["stride"],
                detail_layers=detail_layers, global_layers=global_layers,
                delta=_ints(cfg["delta"]), expand=_ints(cfg["expand"]),
                coarse_iterations=cfg["coarse_iters"],
                fine_iterations=cfg["fine_iters"],
                greyscale_after_coarse=cfg["greyscale_init"],
                seed=cfg["seed"], dump_dir=args.dump_dir)
            out_img, report = inpaint(job)
    except (ValueError, ArithmeticError) as e:
        print(f"error code=4 stage=pipeline: {e}", file=sys.stderr)
        return 4

    try:
        write_png(out_img, args.out)
        if args.report and report is not None:
            with open(args.report, "w") as f:
                f.write(report.text())
    except OSError as e:
        print(f"error code=3 stage=output: {e}", file=sys.stderr)
        return 3
    return 0


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
