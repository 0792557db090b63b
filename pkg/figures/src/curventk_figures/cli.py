"""Command line entry: curventk-figures --kind K --in CSV [--in CSV2] --out PNG."""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, FigureJob, SchemaError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="curventk-figures",
        description="Render curventk CSV artifacts to figure files")
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--in", dest="inputs", action="append", required=True,
                        metavar="CSV", help="input CSV (repeatable)")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--scale", type=float, default=0.3,
                        help="certificate offset scale (certificate-curve)")
    args = parser.parse_args(argv)
    try:
        job = FigureJob(kind=args.kind, inputs=tuple(args.inputs),
                        output=args.out, scale=args.scale)
        path = render(job)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"render failure: {exc}", file=sys.stderr)
        return 3
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
