"""Command-line interface: check, query, repl, serve."""

from __future__ import annotations

import argparse
import os
import sys

from . import driver
from .types import HarropError


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="harrop",
        description="Two-level logic prover: specification-logic execution "
                    "and tactic-driven reasoning.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    c = sub.add_parser("check", help="check a theorem file")
    c.add_argument("file")
    c.add_argument("--depth", type=int, default=None, help="default search depth")

    q = sub.add_parser("query", help="run a goal against a specification")
    q.add_argument("spec")
    q.add_argument("goal")
    q.add_argument("--depth", type=int,
                   default=int(os.environ.get("HARROP_DEPTH", "50")))
    q.add_argument("--trace", action="store_true")

    sub.add_parser("repl", help="interactive session on stdin/stdout")

    s = sub.add_parser("serve", help="serve the session protocol")
    s.add_argument("--port", type=int, default=0,
                   help="TCP port (default: newline-delimited JSON on stdio)")

    args = ap.parse_args(argv)
    if args.cmd == "check":
        report = driver.check_file(args.file, depth=args.depth)
        print(report.render())
        return 0 if report.ok else 1
    if args.cmd == "query":
        try:
            out, text = driver.query(args.spec, args.goal, depth=args.depth,
                                     want_trace=args.trace)
        except HarropError as e:
            print(f"error: {e}", file=sys.stderr)
            return 2
        print(text)
        return 0 if out.ok else 1
    if args.cmd == "repl":
        from .server import repl
        return repl()
    if args.cmd == "serve":
        from .server import serve
        return serve(port=args.port)
    return 2


if __name__ == "__main__":
    sys.exit(main())
