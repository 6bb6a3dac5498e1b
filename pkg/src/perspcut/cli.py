"""Command-line driver: ``solve``, ``detect`` and ``compare``.

Exit codes: 0 whenever the solver terminates (any status), 2 for unreadable
or malformed files, 3 for expressions outside the supported grammar.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from typing import Optional, Sequence

from .bench import (RunRecord, format_table, instance_variant, run_jobs,
                    shifted_geomean, summarize, write_csv)
from .bnb import SETTING_NAMES, settings_for, solve
from .detect import classify_structure, detect_structures
from .fileformat import ParseError, format_instance, parse_instance, read_instance
from .model.expr import UnsupportedExpressionError

__all__ = ["main", "build_parser", "parse_instance", "format_instance", "shifted_geomean"]

EXIT_OK, EXIT_INPUT, EXIT_UNSUPPORTED = 0, 2, 3


class _InputError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _load(path: str):
    try:
        return read_instance(path)
    except OSError as err:
        raise _InputError(EXIT_INPUT, f"cannot read {path}: {err.strerror or err}") from None
    except UnicodeDecodeError:
        raise _InputError(EXIT_INPUT, f"{path}: not UTF-8 text") from None
    except ParseError as err:
        raise _InputError(EXIT_INPUT, f"{path}: {err}") from None
    except UnsupportedExpressionError as err:
        raise _InputError(EXIT_UNSUPPORTED, f"{path}: unsupported expression: {err}") from None


def _fmt(v: float) -> str:
    return f"{v:.10g}" if math.isfinite(v) else str(v)


def cmd_solve(args) -> int:
    inst = _load(args.file)
    name = "full-nobt" if args.mode == "full" and args.no_bound_tightening else args.mode
    overrides = dict(gap_limit=args.gap, time_limit=args.time_limit, seed=args.seed)
    if args.mode != "full":
        overrides["bound_tightening"] = not args.no_bound_tightening
    settings = settings_for(name, **overrides)
    _, st = solve(instance_variant(inst, args.seed), settings)
    rec = RunRecord(inst.name, name, args.seed, st.status, st.primal, st.dual, st.root_dual,
                    st.nodes, st.lp_iterations, st.time, st.cuts_plain, st.cuts_perspective)
    print(f"instance     {inst.name}")
    print(f"setting      {name}")
    print(f"status       {st.status}")
    print(f"primal bound {_fmt(st.primal)}")
    print(f"dual bound   {_fmt(st.dual)}")
    print(f"root dual    {_fmt(st.root_dual)}")
    print(f"gap          {_fmt(st.gap)}")
    print(f"nodes        {st.nodes}")
    print(f"lp iters     {st.lp_iterations}")
    print(f"structures   {st.structures}")
    print(f"cuts         plain={st.cuts_plain} perspective={st.cuts_perspective}")
    print(f"time         {st.time:.3f}s")
    print("RESULT: " + rec.csv_line())
    return EXIT_OK


def cmd_detect(args) -> int:
    inst = _load(args.file)
    structs = detect_structures(inst, probing=not args.no_probing)
    names = [v.name for v in inst.variables]
    for k, s in enumerate(structs):
        con = inst.nonlinear_constraints[s.constraint]
        parts = " ".join(f"{names[v.var]}:off={v.off_value:g},on=[{v.on_lower:g},{v.on_upper:g}]"
                         for v in s.sc_vars)
        print(f"structure {k}: constraint={con.name or s.constraint} indicator={names[s.indicator]} "
              f"class={classify_structure(inst, s)} nvars={len(s.sc_vars)} vars={parts}")
    print(f"{len(structs)} structures")
    return EXIT_OK


def cmd_compare(args) -> int:
    modes = [m.strip().lower() for m in args.modes.split(",") if m.strip()]
    bad = [m for m in modes if m not in SETTING_NAMES]
    if bad or not modes:
        print(f"error: unknown mode(s) {','.join(bad)}; choose from {','.join(SETTING_NAMES)}",
              file=sys.stderr)
        return EXIT_INPUT
    if args.permutations < 1:
        print("error: --permutations must be at least 1", file=sys.stderr)
        return EXIT_INPUT
    texts = []
    for path in args.files:
        inst = _load(path)  # validates before any job starts
        texts.append((inst.name, format_instance(inst)))
    records = run_jobs(texts, modes, permutations=args.permutations, jobs=args.jobs,
                       time_limit=args.time_limit, gap=args.gap)
    for r in records:
        print("RESULT: " + r.csv_line())
    summary, filtered = summarize(records, modes)
    print(format_table(summary, filtered))
    if args.out:
        write_csv(records, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="perspcut",
                                description="Branch-and-cut with perspective cuts.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve one instance file")
    s.add_argument("file")
    s.add_argument("--mode", choices=("off", "convex", "full"), default="full")
    s.add_argument("--no-bound-tightening", action="store_true",
                   help="skip probing-based on-domain tightening")
    s.add_argument("--gap", type=float, default=1e-4)
    s.add_argument("--time-limit", type=float, default=3600.0)
    s.add_argument("--seed", type=int, default=0,
                   help="0 keeps the written order, other values permute it")
    s.set_defaults(func=cmd_solve)

    d = sub.add_parser("detect", help="list perspective structures")
    d.add_argument("file")
    d.add_argument("--no-probing", action="store_true")
    d.set_defaults(func=cmd_detect)

    c = sub.add_parser("compare", help="benchmark settings over instances")
    c.add_argument("files", nargs="+")
    c.add_argument("--modes", default="off,convex,full",
                   help=f"comma-separated subset of {','.join(SETTING_NAMES)}")
    c.add_argument("--permutations", type=int, default=1)
    c.add_argument("--jobs", type=int, default=1)
    c.add_argument("--out", default=None, help="CSV report path")
    c.add_argument("--gap", type=float, default=1e-4)
    c.add_argument("--time-limit", type=float, default=3600.0)
    c.set_defaults(func=cmd_compare)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except _InputError as err:
        print(f"error: {err}", file=sys.stderr)
        return err.code


if __name__ == "__main__":
    sys.exit(main())
