"""Command line for the figure scripts.

Subcommands map one-to-one onto the figure kinds: ``curves``,
``effective-distance``, ``crossing-drift``, ``markov``, ``trace``.
"""

from __future__ import annotations

import argparse
import sys


def build_parser():
    parser = argparse.ArgumentParser(prog="sigdec-plot", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("curves", help="logical error rate vs physical rate")
    p.add_argument("--csv", required=True)
    p.add_argument("--fits", default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("effective-distance", help="fitted exponent vs distance")
    p.add_argument("--fits", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("crossing-drift", help="pairwise crossing points vs distance")
    p.add_argument("--fits", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("markov", help="transformed failure series and rate convergence")
    p.add_argument("--csv", required=True)
    p.add_argument("--fits", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("trace", help="render trace frames / animation")
    p.add_argument("--trace", required=True)
    p.add_argument("--frames-dir", default=None)
    p.add_argument("--gif", default=None)
    p.add_argument("--distance", type=int, default=None)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "curves":
            from .figures import plot_logical_curves

            plot_logical_curves(args.csv, args.fits, out=args.out)
        elif args.command == "effective-distance":
            from .figures import plot_effective_distance

            plot_effective_distance(args.fits, out=args.out)
        elif args.command == "crossing-drift":
            from .figures import plot_crossing_drift

            plot_crossing_drift(args.fits, out=args.out)
        elif args.command == "markov":
            from .figures import plot_markov

            plot_markov(args.csv, args.fits, out=args.out)
        else:
            from .trace import render_trace

            if args.frames_dir is None and args.gif is None:
                print("error: trace needs --frames-dir and/or --gif", file=sys.stderr)
                return 1
            render_trace(args.trace, out_dir=args.frames_dir, gif=args.gif, d=args.distance)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
