"""Batch command-line front end.

Subcommands:
  simulate <config> <out.ulm>     write a simulated RF acquisition
  run      <config> <in.ulm> <outdir>   full pipeline, export the output tree
  evaluate <config> <raster_base>       score an externally supplied map
  inspect  <container>                  print the container header

All knobs live in the config file (key=value, dotted sections); the only
positional arguments are paths. Exit status 0 on success, nonzero with a
single-line error otherwise.
"""

from __future__ import annotations

import argparse
import math
import sys
import time

from ulmkit import io, metrics, pipeline
from ulmkit.config import ConfigError, load_config


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    spec = cfg.phantom()
    probe = cfg.probe()
    n_bubbles = sum(spec.bubble_counts())
    written = io.write_container(args.out, probe, pipeline.simulate_frames(cfg))
    print(f"wrote {args.out}: {spec.n_frames} frames, {n_bubbles} bubbles/frame, {written} bytes")
    return 0


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    reader = io.open_container(args.container)
    started = time.time()
    result = pipeline.run_pipeline(cfg, reader.frames())
    written = pipeline.write_outputs(cfg, result, args.outdir)
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    # timestamps stay out of the data files so reruns are byte-identical
    with open(f"{args.outdir}/run.log", "w", encoding="utf-8") as fh:
        fh.write(f"started={started!r}\nelapsed={time.time() - started!r}\nfiles={len(written)}\n")
    for combo in result.combos:
        r = combo.report
        spread = "n/a" if math.isnan(r.lateral_spread_lambda) else f"{r.lateral_spread_lambda:.3f}"
        print(
            f"{combo.beamformer:>5} {combo.localizer:<8} tracks={len(combo.tracks):<4} "
            f"contrast={r.local_contrast_mean:.4f}+-{r.local_contrast_std:.4f} spread={spread}"
        )
    print(f"wrote {len(written)} files to {args.outdir}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = load_config(args.config)
    values, meta = io.read_raster(args.raster)
    lam = cfg.probe().wavelength
    region_m = cfg.metrics_region()
    mean, std = metrics.local_contrast_score(values, masked=cfg["metrics.masked"])
    spread = float("nan")
    if region_m is not None:
        import numpy as np

        from ulmkit.beamform import BeamGrid

        nz, nx = values.shape
        grid = BeamGrid(
            x=meta["origin_x"] + np.arange(nx) * meta["pitch_x"],
            z=meta["origin_z"] + np.arange(nz) * meta["pitch_z"],
        )
        bins = pipeline.region_to_bins(grid, region_m)
        spread = metrics.lateral_spread_score(values, meta["pitch_x"], lam, bins).value
    print("beamformer,localizer,local_contrast_mean,local_contrast_std,lateral_spread_lambda")
    spread_txt = "" if math.isnan(spread) else repr(spread)
    print(f"external,external,{mean!r},{std!r},{spread_txt}")
    return 0


def cmd_inspect(args) -> int:
    reader = io.open_container(args.container)
    probe = reader.probe
    print(f"magic=ULMF version=1")
    print(f"n_frames={reader.n_frames}")
    print(f"n_samples={reader.n_samples}")
    print(f"n_channels={probe.n_elements}")
    print(f"pitch={probe.pitch!r}")
    print(f"fc={probe.fc!r}")
    print(f"fs={probe.fs!r}")
    print(f"c={probe.c!r}")
    print(f"frame_rate={probe.frame_rate!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ulmkit", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate an RF acquisition")
    p.add_argument("config")
    p.add_argument("out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("run", help="run the full pipeline on a container")
    p.add_argument("config")
    p.add_argument("container")
    p.add_argument("outdir")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("evaluate", help="score an externally supplied raster")
    p.add_argument("config")
    p.add_argument("raster", help="raster base path (without .f32/.txt)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("inspect", help="print a container header")
    p.add_argument("container")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        message = str(exc).replace("\n", " ").strip() or exc.__class__.__name__
        print(f"error: {message}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
