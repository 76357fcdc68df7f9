"""plots <kind> --in <dir> --out <file.png|.svg>"""

import argparse
import sys
from pathlib import Path

from .render import KINDS, FigureSpec, RenderError, render


def make_parser():
    ap = argparse.ArgumentParser(
        prog="plots", description="Render stabilizer run logs into figures")
    ap.add_argument("kind", choices=KINDS)
    ap.add_argument("--in", dest="indir", required=True,
                    help="directory with the CSV/JSON logs")
    ap.add_argument("--out", required=True, help="output image (.png or .svg)")
    ap.add_argument("--zoom", nargs=2, type=float, metavar=("LO", "HI"),
                    help="error window for the montecarlo zoom panel")
    return ap


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        spec = FigureSpec(kind=args.kind, in_dir=Path(args.indir),
                          out_path=Path(args.out),
                          zoom=tuple(args.zoom) if args.zoom else None)
        meta = render(spec)
    except RenderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out} ({meta})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
