"""feedback-plots command line: render figures from experiment CSV outputs."""

from __future__ import annotations

import argparse
import sys

from .render import FigureSpec, RenderError, render_ccdf, render_trace


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="feedback-plots",
        description="Render cCDF / trace figures from gmm-feedback CSV files")
    parser.add_argument("command", choices=["render"])
    parser.add_argument("--spec", required=True, help="JSON figure spec path")
    parser.add_argument("--kind", choices=["ccdf", "trace"], default="ccdf")
    args = parser.parse_args(argv)
    try:
        spec = FigureSpec.from_file(args.spec)
        out = render_ccdf(spec) if args.kind == "ccdf" else render_trace(spec)
        print(f"wrote {out}")
        return 0
    except RenderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
