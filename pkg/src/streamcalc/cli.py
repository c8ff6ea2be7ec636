"""Command-line front end.

Exit status: 0 on success, 1 on runtime errors, 2 on parse or validation
errors.  Diagnostics go to stderr as ``ErrorClass: message``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import NotWellDefined, OracleMismatch, RuntimeFailure, SortError, StaticError, StreamCalcError
from .indexing import guarded_at
from .oracle import DEFAULT_PRECISION, oracle_prefix
from .semantics import DEFAULT_FUEL, Interpreter
from .syntax import (
    STREAM,
    StreamValue,
    alpha_canonicalize,
    capsule_to_json,
    check_expr,
    format_number,
    parse_expr,
    parse_program,
    render_capsule,
    render_value,
)
from .wellformedness import capsule_violation


def _fuel_default():
    raw = os.environ.get("STREAMCALC_FUEL")
    if raw is None:
        return DEFAULT_FUEL
    try:
        value = int(raw)
    except ValueError:
        raise SystemExit(f"STREAMCALC_FUEL must be an integer, got {raw!r}")
    return value


def _positive(text):
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _natural(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("program", help="source file with function declarations (.sc)")
    common.add_argument("--eval", "-e", dest="expr", required=True, help="expression to evaluate")
    common.add_argument("--fuel", type=_positive, default=None,
                        help=f"maximum number of call expansions (default: $STREAMCALC_FUEL or {DEFAULT_FUEL})")
    common.add_argument("--precision", type=_natural, default=DEFAULT_PRECISION,
                        help="prefix length used by the fixed-point oracle")
    common.add_argument("--format", choices=("text", "json"), default="text")

    parser = argparse.ArgumentParser(
        prog="streamcalc",
        description="Evaluate stream programs with regular corecursion.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="evaluate to a capsule")
    p_at = sub.add_parser("at", parents=[common], help="element at an index")
    p_at.add_argument("--index", "-i", type=_natural, required=True)
    p_prefix = sub.add_parser("prefix", parents=[common], help="first elements of a stream")
    p_prefix.add_argument("--count", "-n", type=_natural, default=10)
    p_prefix.add_argument("--oracle", action="store_true",
                          help="cross-check every element against the fixed-point oracle")
    sub.add_parser("check", parents=[common], help="check well-definedness of the result")
    sub.add_parser("dump", parents=[common], help="print the capsule as JSON")
    return parser


def _load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_program(fh.read())
    except OSError as exc:
        raise StaticError(f"cannot read {path}: {exc.strerror}") from exc


def _canonical(capsule):
    return alpha_canonicalize(capsule) if capsule.is_closed() else capsule


def _stream_capsule(interp, expr, program):
    if check_expr(expr, program) != STREAM:
        raise SortError(f"{expr} is not a stream expression")
    return interp.evaluate(expr)


def execute(args) -> str:
    program = _load(args.program)
    expr = parse_expr(args.expr)
    check_expr(expr, program)
    fuel = args.fuel if args.fuel is not None else _fuel_default()
    interp = Interpreter(program, fuel=fuel)
    as_json = args.format == "json"

    if args.command in ("run", "dump"):
        capsule = _canonical(interp.evaluate(expr))
        if args.command == "dump" or as_json:
            return json.dumps(capsule_to_json(capsule))
        return render_capsule(capsule)

    capsule = _stream_capsule(interp, expr, program)

    if args.command == "at":
        value = guarded_at(capsule.env, capsule.value, args.index)
        if as_json:
            return json.dumps({"index": args.index, "value": format_number(value)})
        return format_number(value)

    if args.command == "prefix":
        values = [guarded_at(capsule.env, capsule.value, i) for i in range(args.count)]
        if args.oracle:
            reference = oracle_prefix(capsule, max(args.count, args.precision))
            for i, (v, r) in enumerate(zip(values, reference)):
                if v != r:
                    raise OracleMismatch(i, format_number(v), None if r is None else format_number(r))
        if as_json:
            return json.dumps({"prefix": [format_number(v) for v in values]})
        return " ".join(format_number(v) for v in values)

    # check
    witness = capsule_violation(capsule.value, capsule.env)
    if witness is not None:
        raise NotWellDefined(render_value(capsule.value), capsule.value, witness)
    if as_json:
        return json.dumps({"well_defined": True, "capsule": capsule_to_json(_canonical(capsule))})
    return "well-defined"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out = execute(args)
    except StaticError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (RuntimeFailure, StreamCalcError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
