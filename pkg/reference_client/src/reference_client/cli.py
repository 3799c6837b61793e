"""Command-line entry points: `serve` and `overlay`."""

import argparse
import json
import sys

from .overlay import plot_overlay
from .protocol import ProtocolError, serve_mean


def _fail(code, kind, message):
    print(json.dumps({"error": message, "kind": kind}), file=sys.stderr)
    raise SystemExit(code)


def cmd_serve(args):
    del args
    return serve_mean(sys.stdin.buffer, sys.stdout.buffer)


def cmd_overlay(args):
    index = args.index
    if index is None:
        from .overlay import load_volume

        index = load_volume(args.volume).shape[args.axis] // 2
    out = plot_overlay(args.volume, args.heatmap, args.axis, index, args.output)
    if not args.quiet:
        print(out)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="reference-client",
        description="reference slice evaluator and heatmap overlay renderer",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    sv = subs.add_parser("serve", help="answer slice batches with pixel means")
    sv.set_defaults(func=cmd_serve)

    ov = subs.add_parser("overlay", help="render a heatmap slice over its volume")
    ov.add_argument("volume", help="input volume (<stem>.json/.bin pair)")
    ov.add_argument("heatmap", help="heatmap of the same shape")
    ov.add_argument("output", help="output image path")
    ov.add_argument("--axis", type=int, choices=[0, 1, 2], default=0)
    ov.add_argument("--index", type=int, default=None,
                    help="slice index (default: middle of the axis)")
    ov.add_argument("--quiet", action="store_true")
    ov.set_defaults(func=cmd_overlay)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ProtocolError as exc:
        _fail(1, type(exc).__name__, str(exc))
    except FileNotFoundError as exc:
        _fail(2, "missing-file", str(exc))
    except (ValueError, IndexError) as exc:
        _fail(1, type(exc).__name__, str(exc))


if __name__ == "__main__":
    raise SystemExit(main())
