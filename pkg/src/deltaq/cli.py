"""``dq`` command-line front end.

Exit codes: 0 success, 1 usage or input error, 2 rule mismatch,
3 timeliness agreement violated.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .analysis import (QTA, QTAError, check_qta, failure_analysis, format_decimal,
                       format_scientific)
from .expr import ParseError, base_names, parse, pretty
from .oracle import sample
from .rewrite import (RewriteTrace, RuleMismatch, UnknownRule, apply_at, normalize)
from .semantics import BasicAssignment, SpecError, evaluate

EXIT_OK, EXIT_USAGE, EXIT_MISMATCH, EXIT_VIOLATED = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _positive(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return value


def _trials(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("trials must be at least 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dq", description="Timeliness analysis of outcome expressions.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, assignment=True):
        p.add_argument("-e", "--expr", required=True, help="expression file")
        if assignment:
            p.add_argument("-a", "--assignment", required=True, help="assignment JSON")
        p.add_argument("--dt", type=_positive, help="override the grid step")
        p.add_argument("--tmax", type=_positive, help="override the grid horizon")
        p.add_argument("-o", "--output", help="output file (default stdout)")

    common(sub.add_parser("eval", help="write the CDF of an expression as CSV"))
    rw = sub.add_parser("rewrite", help="apply a rule or normalize")
    common(rw, assignment=False)
    rw.add_argument("--rule", help="rule id")
    rw.add_argument("--path", default="", help="L/R path to the subtree (default root)")
    rw.add_argument("--rtl", action="store_true", help="apply the rule right to left")
    rw.add_argument("--normalize", action="store_true", help="run the normalization strategy")
    common(sub.add_parser("failure", help="print the failure probability"))
    ck = sub.add_parser("check", help="check a timeliness agreement")
    common(ck)
    ck.add_argument("--qta", required=True, help="agreement JSON")
    sm = sub.add_parser("sample", help="Monte Carlo sample of completion times")
    common(sm)
    sm.add_argument("--seed", type=_u64, default=0)
    sm.add_argument("--trials", type=_trials, default=100_000)
    return parser


def _read_expr(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return parse(text)
    except ParseError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _read_assignment(args) -> BasicAssignment:
    try:
        return BasicAssignment.load(args.assignment, dt=args.dt, tmax=args.tmax)
    except OSError as exc:
        raise UsageError(f"cannot read {args.assignment}: {exc.strerror}") from None
    except (json.JSONDecodeError, SpecError, ValueError) as exc:
        raise UsageError(f"{args.assignment}: {exc}") from None


def _warn_unassigned(expr, assignment):
    for name in base_names(expr):
        if not assignment.is_assigned(name):
            print(f"warning: {name}: unassigned outcome treated as perfection",
                  file=sys.stderr)


def _emit(text: str, output: str | None):
    if output:
        try:
            Path(output).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot write {output}: {exc.strerror}") from None
    else:
        sys.stdout.write(text)


def cmd_eval(args) -> int:
    expr = _read_expr(args.expr)
    assignment = _read_assignment(args)
    _warn_unassigned(expr, assignment)
    dq = evaluate(expr, assignment)
    _emit(dq.to_csv(), args.output)
    stream = sys.stdout if args.output else sys.stderr
    print(f"intangible={dq.intangible!r} overflow={dq.overflow!r}", file=stream)
    return EXIT_OK


def cmd_rewrite(args) -> int:
    expr = _read_expr(args.expr)
    if args.normalize == bool(args.rule):
        raise UsageError("give exactly one of --rule or --normalize")
    trace = RewriteTrace(expr)
    if args.normalize:
        out = normalize(expr, trace)
    else:
        try:
            out = apply_at(expr, args.rule, args.path, "rtl" if args.rtl else "ltr", trace)
        except UnknownRule as exc:
            raise UsageError(str(exc)) from None
    _emit(pretty(out) + "\n" + trace.to_text(), args.output)
    return EXIT_OK


def cmd_failure(args) -> int:
    expr = _read_expr(args.expr)
    assignment = _read_assignment(args)
    _warn_unassigned(expr, assignment)
    result = failure_analysis(expr, assignment)
    line = (f"failure={format_scientific(result.failure)} "
            f"success={format_decimal(result.success)}\n")
    if result.method == "numeric":
        print("note: failure trapped under first-to-finish; using numeric evaluation",
              file=sys.stderr)
    _emit(line, args.output)
    return EXIT_OK


def cmd_check(args) -> int:
    expr = _read_expr(args.expr)
    assignment = _read_assignment(args)
    _warn_unassigned(expr, assignment)
    try:
        qta = QTA.load(args.qta)
    except OSError as exc:
        raise UsageError(f"cannot read {args.qta}: {exc.strerror}") from None
    except (json.JSONDecodeError, QTAError) as exc:
        raise UsageError(f"{args.qta}: {exc}") from None
    try:
        verdict = check_qta(expr, assignment, qta)
    except QTAError as exc:
        raise UsageError(str(exc)) from None
    _emit(verdict.summary() + "\n", args.output)
    return EXIT_OK if verdict.satisfied else EXIT_VIOLATED


def cmd_sample(args) -> int:
    expr = _read_expr(args.expr)
    assignment = _read_assignment(args)
    _warn_unassigned(expr, assignment)
    report = sample(expr, assignment, seed=args.seed, trials=args.trials)
    _emit(report.to_csv(), args.output)
    return EXIT_OK


COMMANDS = {"eval": cmd_eval, "rewrite": cmd_rewrite, "failure": cmd_failure,
            "check": cmd_check, "sample": cmd_sample}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"dq: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RuleMismatch as exc:
        print(f"dq: no match: {exc}", file=sys.stderr)
        return EXIT_MISMATCH


if __name__ == "__main__":
    sys.exit(main())
