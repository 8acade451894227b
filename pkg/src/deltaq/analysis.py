"""Failure rates, timeliness agreements and design comparison."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from decimal import Decimal, localcontext
from fractions import Fraction
from pathlib import Path
from typing import Mapping, NamedTuple

import numpy as np

from .expr import BOT, OutcomeExpr, as_fraction, base_names, substitute
from .numeric import leq
from .rewrite import NotExtractable, RewriteTrace, extract_failure, properise
from .semantics import BasicAssignment, evaluate


# --------------------------------------------------------------------------
# Number formatting
# --------------------------------------------------------------------------


def format_scientific(value) -> str:
    """Shortest round-tripping mantissa with at least one decimal: ``5.0e-18``."""
    x = float(value)
    if x == 0:
        return "0.0e+00"
    return np.format_float_scientific(x, unique=True, trim="0", exp_digits=2)


def format_decimal(value: Fraction, digits: int = 40) -> str:
    """Exact decimal text of a fraction in [0, 1].

    Terminating expansions print in full; others are rounded to ``digits``
    significant digits.
    """
    value = as_fraction(value)
    d = value.denominator
    k = 0
    while d % 2 == 0:
        d //= 2
        k += 1
    j = 0
    while d % 5 == 0:
        d //= 5
        j += 1
    if d == 1:
        places = max(k, j)
        scaled = value.numerator * (10**places // value.denominator)
        text = f"{scaled:0{places + 1}d}" if places else str(scaled)
        if places:
            text = f"{text[:-places]}.{text[-places:]}".rstrip("0").rstrip(".")
        return text
    with localcontext() as ctx:
        ctx.prec = digits
        return str(Decimal(value.numerator) / Decimal(value.denominator))


# --------------------------------------------------------------------------
# Failure rate
# --------------------------------------------------------------------------


class FailureResult(NamedTuple):
    failure: Fraction
    method: str  # "symbolic" or "numeric"
    trace: RewriteTrace | None

    @property
    def success(self) -> Fraction:
        return 1 - self.failure


def failure_analysis(expr: OutcomeExpr, assignment: BasicAssignment) -> FailureResult:
    """Failure probability of ``expr``, exactly when the algebra allows it.

    Every improper base outcome is properised (a certain failure becomes
    ``bot``), then the failures are floated to the root by rewriting. If a
    failure is trapped under first-to-finish, the numeric intangible mass of
    the evaluated DeltaQ is returned instead.
    """
    work = expr
    improper = []
    for name in base_names(expr):
        i = assignment.failure_of(name)
        if i == 1:
            work = substitute(work, name, BOT)
        elif i > 0:
            improper.append(name)
    work = properise(work, assignment, improper).expr
    try:
        ext = extract_failure(work)
    except NotExtractable:
        im = evaluate(expr, assignment).intangible
        return FailureResult(as_fraction(im), "numeric", None)
    return FailureResult(ext.failure, "symbolic", ext.trace)


def failure_rate(expr: OutcomeExpr, assignment: BasicAssignment) -> Fraction:
    return failure_analysis(expr, assignment).failure


# --------------------------------------------------------------------------
# Timeliness agreements
# --------------------------------------------------------------------------


class QTAError(ValueError):
    pass


@dataclass(frozen=True)
class QTA:
    """Required delay percentiles plus a ceiling on failure."""

    points: tuple  # ((t, min_cum_prob), ...)
    max_failure: float

    def __post_init__(self):
        pts = tuple((float(t), float(p)) for t, p in self.points)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "max_failure", float(self.max_failure))
        if not 0 <= self.max_failure <= 1:
            raise QTAError("maxFailure must be in [0, 1]")
        prev_t, prev_p = -math.inf, 0.0
        for t, p in pts:
            if t < 0 or not 0 <= p <= 1:
                raise QTAError(f"QTA point ({t}, {p}) is out of range")
            if t < prev_t or p < prev_p:
                raise QTAError("QTA points must be nondecreasing in time and probability")
            prev_t, prev_p = t, p
        if pts and pts[-1][1] > 1 - self.max_failure + 1e-12:
            raise QTAError("final QTA probability exceeds 1 - maxFailure")

    @classmethod
    def from_json(cls, data: Mapping) -> "QTA":
        try:
            pts = [(row["t"], row["p"]) for row in data["points"]]
            return cls(tuple(pts), data.get("maxFailure", 0.0))
        except (KeyError, TypeError) as exc:
            raise QTAError(f"malformed QTA: {exc}") from None

    @classmethod
    def load(cls, path) -> "QTA":
        with open(Path(path), encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


class Violation(NamedTuple):
    time: float
    required: float
    observed: float


@dataclass(frozen=True)
class Verdict:
    satisfied: bool
    violations: tuple
    failure_observed: float
    failure_allowed: float
    slack: float

    def summary(self) -> str:
        lines = [f"satisfied={'yes' if self.satisfied else 'no'} "
                 f"failure_observed={self.failure_observed!r} "
                 f"failure_allowed={self.failure_allowed!r} slack={self.slack!r}"]
        for v in self.violations:
            lines.append(f"violation t={v.time!r} required={v.required!r} observed={v.observed!r}")
        return "\n".join(lines)


def check_dq(dq, qta: QTA) -> Verdict:
    violations = []
    slack = math.inf
    for t, p in qta.points:
        if t > dq.grid.tmax + 1e-9 * dq.grid.tmax:
            raise QTAError(f"QTA point t={t} is beyond the grid horizon "
                           f"{dq.grid.tmax}; increase tMax")
        observed = dq.cdf_at(t)
        slack = min(slack, observed - p)
        if observed < p:
            violations.append(Violation(t, p, observed))
    observed_failure = dq.intangible
    ok = not violations and observed_failure <= qta.max_failure
    return Verdict(ok, tuple(violations), observed_failure, qta.max_failure, slack)


def check_qta(expr: OutcomeExpr, assignment: BasicAssignment, qta: QTA) -> Verdict:
    return check_dq(evaluate(expr, assignment), qta)


def compare_designs(a: OutcomeExpr, b: OutcomeExpr, assignment: BasicAssignment,
                    tol: float = 1e-9) -> str:
    """``"A<=B"`` when design A is at least as timely as B, and so on."""
    memo: dict = {}
    da, db = evaluate(a, assignment, memo), evaluate(b, assignment, memo)
    ab, ba = leq(da, db, tol), leq(db, da, tol)
    if ab and ba:
        return "equal"
    if ab:
        return "A<=B"
    if ba:
        return "B<=A"
    return "incomparable"
