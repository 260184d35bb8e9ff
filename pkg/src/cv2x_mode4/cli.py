"""Command-line front end: analytic curves, simulation, comparison, sweeps."""

import argparse
import sys

from .errors import ConfigurationError, ModelError
from .harness import load_manifest, run_analytic, run_compare, run_simulate, run_sweep


def _add_common(p):
    p.add_argument("--config", help="YAML run manifest (built-in defaults if omitted)")
    p.add_argument("--out-dir", help="output directory (else $CV2X_MODE4_OUT_DIR, "
                                     "else the manifest's out_dir)")


def _add_sim_flags(p):
    p.add_argument("--seed", type=int, action="append",
                   help="simulation seed; repeat for several (overrides manifest)")
    p.add_argument("--duration-s", type=float, help="total seconds incl. warmup")
    p.add_argument("--bins", type=float, help="distance bin width in meters")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cv2x-mode4",
        description="Mode 4 sidelink PDR model and SPS simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analytic", help="emit analytic PDR curves per scenario")
    _add_common(p)

    p = sub.add_parser("simulate", help="run the SPS simulator per scenario")
    _add_common(p)
    _add_sim_flags(p)
    p.add_argument("--trace", action="store_true",
                   help="write a per-reception event trace per seed")

    p = sub.add_parser("compare", help="simulate, model, and report MAD per scenario")
    _add_common(p)
    _add_sim_flags(p)

    p = sub.add_parser("sweep", help="analytic-only sweep with a summary table")
    _add_common(p)
    return parser


def _apply_overrides(manifest, args):
    if getattr(args, "seed", None):
        manifest.seeds = list(args.seed)
    if getattr(args, "duration_s", None) is not None:
        manifest.duration_s = args.duration_s
    if getattr(args, "bins", None) is not None:
        manifest.bin_width_m = args.bins
    return manifest


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        manifest = _apply_overrides(load_manifest(args.config), args)
        if args.command == "analytic":
            _, failures = run_analytic(manifest, args.out_dir)
        elif args.command == "simulate":
            _, failures = run_simulate(manifest, args.out_dir, trace=args.trace)
        elif args.command == "compare":
            report = run_compare(manifest, args.out_dir)
            failures = [r for r in report.rows if r.error is not None]
        else:
            _, failures = run_sweep(manifest, args.out_dir)
    except (ConfigurationError, ModelError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
