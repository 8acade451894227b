"""Timeliness-preserving rewriting of outcome expressions.

Rules are written as pairs of patterns. A pattern is an ordinary expression
tree whose leaves may be :class:`PVar` metavariables and whose choices may be
:class:`PChoice` nodes binding a weight pair to a name. A rule either copies
weight pairs unchanged or recomputes them through its ``coeffs`` function.

The catalog (:func:`rule_catalog`) holds the named equivalences; a handful of
auxiliary rules (commutativity, the mirrored constant laws, degenerate
choices) support the normalization strategy and are listed separately.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, NamedTuple

from .expr import (BOT, TOP, AllToFinish, AnyToFinish, Base, Bottom, OutcomeExpr,
                   ProbChoice, Seq, Top, as_fraction, contains_bottom,
                   parse, pretty, rebuild, substitute, Weight)


class RuleMismatch(ValueError):
    """The rule's pattern does not match, or its coefficients degenerate."""


class InvalidPath(RuleMismatch):
    pass


class UnknownRule(KeyError):
    def __str__(self):
        return f"unknown rule {self.args[0]!r}"


class NotExtractable(ValueError):
    pass


FTF_MESSAGE = "failure not accumulable under first-to-finish"


# --------------------------------------------------------------------------
# Patterns
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PVar(OutcomeExpr):
    name: str


@dataclass(frozen=True)
class PChoice(OutcomeExpr):
    left: OutcomeExpr
    right: OutcomeExpr
    weight: str

    def children(self):
        return (self.left, self.right)


Pair = tuple  # (m, m') of Fractions


def prob(pair: Pair) -> Fraction:
    m, mp = pair
    return m / (m + mp)


def _pair(p: Fraction) -> Pair:
    return (p, 1 - p)


def _same_weights(a: Pair, b: Pair) -> bool:
    return prob(a) == prob(b)


def match(pattern: OutcomeExpr, expr: OutcomeExpr,
          exprs: dict | None = None, weights: dict | None = None):
    """Match ``expr`` against ``pattern``.

    Returns ``(exprs, weights)`` bindings or ``None``. A metavariable that
    occurs twice must bind structurally equal subtrees; a weight name that
    occurs twice must bind the same normalized probability.
    """
    exprs = {} if exprs is None else exprs
    weights = {} if weights is None else weights
    if _match(pattern, expr, exprs, weights):
        return exprs, weights
    return None


def _match(pat, expr, exprs, weights) -> bool:
    if isinstance(pat, PVar):
        bound = exprs.get(pat.name)
        if bound is None:
            exprs[pat.name] = expr
            return True
        return bound == expr
    if isinstance(pat, PChoice):
        if not isinstance(expr, ProbChoice):
            return False
        pair = (expr.w_left, expr.w_right)
        bound = weights.get(pat.weight)
        if bound is None:
            weights[pat.weight] = pair
        elif not _same_weights(bound, pair):
            return False
        return _match(pat.left, expr.left, exprs, weights) and \
            _match(pat.right, expr.right, exprs, weights)
    if isinstance(pat, (Top, Bottom)):
        return type(expr) is type(pat)
    if isinstance(pat, Base):
        return expr == pat
    if type(pat) is not type(expr):
        return False
    return _match(pat.left, expr.left, exprs, weights) and \
        _match(pat.right, expr.right, exprs, weights)


def instantiate(pattern: OutcomeExpr, exprs: dict, weights: dict) -> OutcomeExpr:
    if isinstance(pattern, PVar):
        return exprs[pattern.name]
    if isinstance(pattern, PChoice):
        m, mp = weights[pattern.weight]
        return ProbChoice(instantiate(pattern.left, exprs, weights),
                          instantiate(pattern.right, exprs, weights), m, mp)
    if isinstance(pattern, (Top, Bottom, Base)):
        return pattern
    return type(pattern)(instantiate(pattern.left, exprs, weights),
                         instantiate(pattern.right, exprs, weights))


def pattern_vars(pattern: OutcomeExpr) -> set[str]:
    if isinstance(pattern, PVar):
        return {pattern.name}
    return set().union(*(pattern_vars(c) for c in pattern.children())) \
        if pattern.children() else set()


def pattern_weights(pattern: OutcomeExpr) -> set[str]:
    own = {pattern.weight} if isinstance(pattern, PChoice) else set()
    for c in pattern.children():
        own |= pattern_weights(c)
    return own


_OPS = {Seq: "->-", AllToFinish: "/\\", AnyToFinish: "\\/"}


def pattern_text(pattern: OutcomeExpr, top: bool = True) -> str:
    if isinstance(pattern, PVar):
        return pattern.name
    if isinstance(pattern, (Top, Bottom, Base)):
        return pretty(pattern)
    left = pattern_text(pattern.left, False)
    right = pattern_text(pattern.right, False)
    if isinstance(pattern, PChoice):
        text = f"{left} <[{pattern.weight}]> {right}"
    else:
        text = f"{left} {_OPS[type(pattern)]} {right}"
    return text if top else f"({text})"


# --------------------------------------------------------------------------
# Rules
# --------------------------------------------------------------------------

Coeffs = Callable[[dict], dict]


@dataclass(frozen=True)
class RewriteRule:
    """A named equivalence ``lhs = rhs``.

    ``coeffs`` maps the weight bindings of a left-hand match to the weights
    of the right-hand side (``None`` copies them by name). ``inverse`` does
    the same for right-to-left use. Either may raise :class:`RuleMismatch`
    when the coefficients degenerate.
    """

    id: str
    group: str
    lhs: OutcomeExpr
    rhs: OutcomeExpr
    coeffs: Coeffs | None = None
    inverse: Coeffs | None = None
    note: str = ""

    @property
    def law(self) -> str:
        text = f"{pattern_text(self.lhs)} = {pattern_text(self.rhs)}"
        return f"{text}, {self.note}" if self.note else text

    @property
    def reversible(self) -> bool:
        if not pattern_vars(self.lhs) <= pattern_vars(self.rhs):
            return False
        if self.coeffs is None:
            return pattern_weights(self.lhs) <= pattern_weights(self.rhs)
        return self.inverse is not None

    def _sides(self, direction: str):
        if direction == "ltr":
            return self.lhs, self.rhs, self.coeffs
        if direction == "rtl":
            if not self.reversible:
                raise RuleMismatch(f"rule {self.id} cannot be applied right to left")
            return self.rhs, self.lhs, self.inverse
        raise ValueError(f"direction must be 'ltr' or 'rtl', got {direction!r}")

    def apply(self, expr: OutcomeExpr, direction: str = "ltr"):
        """Rewrite ``expr`` at its root; returns ``(new_expr, coefficients)``."""
        src, dst, fn = self._sides(direction)
        bound = match(src, expr)
        if bound is None:
            raise RuleMismatch(f"rule {self.id} does not match {pretty(expr)}")
        exprs, weights = bound
        new_weights = dict(weights) if fn is None else fn(weights)
        return instantiate(dst, exprs, new_weights), new_weights

    def matches(self, expr: OutcomeExpr, direction: str = "ltr") -> bool:
        try:
            self.apply(expr, direction)
        except RuleMismatch:
            return False
        return True


o, o1, o2, o3 = PVar("o"), PVar("o1"), PVar("o2"), PVar("o3")


def _ch(left, right, w="w"):
    return PChoice(left, right, w)


def _degenerate(what: str):
    raise RuleMismatch(f"degenerate coefficients: {what}")


def reassoc_left(p: Weight, q: Weight) -> tuple[Fraction, Fraction]:
    """Coefficients for ``o1 <[p]> (o2 <[q]> o3) = (o1 <[p']> o2) <[q']> o3``."""
    p, q = as_fraction(p), as_fraction(q)
    q_new = 1 - (1 - p) * (1 - q)
    if q_new == 0:
        raise ValueError("re-association undefined for p = q = 0")
    return p / q_new, q_new


def reassoc_right(p: Weight, q: Weight) -> tuple[Fraction, Fraction]:
    """Coefficients for ``(o1 <[p]> o2) <[q]> o3 = o1 <[p']> (o2 <[q']> o3)``."""
    p, q = as_fraction(p), as_fraction(q)
    if p * q == 1:
        raise ValueError("re-association undefined for p * q = 1")
    return p * q, q * (1 - p) / (1 - p * q)


def _coef(formula, src, dst):
    """Weight function: normalized probabilities ``src`` -> pairs ``dst``."""

    def fn(w):
        try:
            vals = formula(*(prob(w[name]) for name in src))
        except (ValueError, ZeroDivisionError) as exc:
            _degenerate(str(exc))
        return {name: _pair(v) for name, v in zip(dst, vals)}

    return fn


def _renest(p, q):
    denom = 1 - q * (1 - p)
    if denom == 0:
        raise ValueError("1 - q(1 - p) = 0")
    return q * (1 - p), p / denom


def _nest(p, q):
    return (p + (1 - p) * q,)


def _product(p1, p2):
    return (p1 * p2,)


def _fail_choice(p, p1, p2):
    r = p2 - p * p2 + p * p1
    if r == 0:
        raise ValueError("r = 0")
    return p * p1 / r, r


PQ, PQ2 = ("p", "q"), ("p'", "q'")


def _swap(w):
    m, mp = w["w"]
    return {"w": (mp, m)}


def _left_certain(w):
    if w["w"][1] != 0:
        _degenerate("right weight is not zero")
    return {}


def _right_certain(w):
    if w["w"][0] != 0:
        _degenerate("left weight is not zero")
    return {}


def _catalog() -> list[RewriteRule]:
    R = RewriteRule
    rules = [
        # constants
        R("choice-bot-collapse", "constant", _ch(BOT, BOT), BOT),
        R("choice-bot-left-commute", "constant", Seq(_ch(o1, BOT), o2), _ch(Seq(o1, o2), BOT)),
        R("seq-bot", "constant", Seq(o, BOT), BOT),
        R("choice-top-collapse", "constant", _ch(TOP, TOP), TOP),
        R("bot-seq", "constant", Seq(BOT, o), BOT),
        R("choice-bot-right-commute", "constant", Seq(o1, _ch(o2, BOT)), _ch(Seq(o1, o2), BOT)),
        R("top-seq", "constant", Seq(TOP, o), o),
        R("seq-top", "constant", Seq(o, TOP), o),
        R("top-atf", "constant", AllToFinish(TOP, o), o),
        R("choice-top-left-commute", "constant", Seq(_ch(o1, TOP), o2), _ch(Seq(o1, o2), o2)),
        R("choice-top-right-commute", "constant", Seq(o1, _ch(o2, TOP)), _ch(Seq(o1, o2), o1)),
        R("bot-ftf", "constant", AnyToFinish(BOT, o), o),
        R("choice-top-renest", "constant",
          _ch(o1, _ch(o2, TOP, "q"), "p"), _ch(o2, _ch(o1, TOP, "q'"), "p'"),
          _coef(_renest, PQ, PQ2), _coef(_renest, PQ2, PQ),
          "p' = q(1 - p), q' = p/(1 - q(1 - p))"),
        R("choice-bot-nest", "constant",
          _ch(BOT, _ch(BOT, o, "q"), "p"), _ch(BOT, o, "r"),
          _coef(_nest, PQ, ("r",)), None, "r = p + (1 - p)q"),
        # re-association
        R("choice-reassoc-left", "reassociation",
          _ch(o1, _ch(o2, o3, "q"), "p"), _ch(_ch(o1, o2, "p'"), o3, "q'"),
          _coef(reassoc_left, PQ, PQ2), _coef(reassoc_right, PQ2, PQ),
          "p' = p/(1 - (1 - p)(1 - q)), q' = 1 - (1 - p)(1 - q)"),
        R("choice-reassoc-right", "reassociation",
          _ch(_ch(o1, o2, "p"), o3, "q"), _ch(o1, _ch(o2, o3, "q'"), "p'"),
          _coef(reassoc_right, PQ, PQ2), _coef(reassoc_left, PQ2, PQ),
          "p' = pq, q' = q(1 - p)/(1 - pq)"),
    ]
    for name, op in (("seq", Seq), ("atf", AllToFinish), ("ftf", AnyToFinish)):
        rules.append(R(f"dist-{name}-left", "distributivity",
                       op(o1, _ch(o2, o3)), _ch(op(o1, o2), op(o1, o3))))
        rules.append(R(f"dist-{name}-right", "distributivity",
                       op(_ch(o1, o2), o3), _ch(op(o1, o3), op(o2, o3))))
    rules += [
        R("fail-acc-seq", "failure-accumulation",
          Seq(_ch(o1, BOT, "p1"), _ch(o2, BOT, "p2")), _ch(Seq(o1, o2), BOT, "r"),
          _coef(_product, ("p1", "p2"), ("r",)), None, "r = p1 p2"),
        R("fail-acc-choice", "failure-accumulation",
          _ch(_ch(o1, BOT, "p1"), _ch(o2, BOT, "p2"), "p"), _ch(_ch(o1, o2, "q"), BOT, "r"),
          _coef(_fail_choice, ("p", "p1", "p2"), ("q", "r")), None,
          "q = p p1/r, r = p2 - p p2 + p p1"),
        R("fail-acc-atf", "failure-accumulation",
          AllToFinish(_ch(o1, BOT, "p1"), _ch(o2, BOT, "p2")), _ch(AllToFinish(o1, o2), BOT, "r"),
          _coef(_product, ("p1", "p2"), ("r",)), None, "r = p1 p2"),
    ]
    return rules


def _auxiliary() -> list[RewriteRule]:
    R = RewriteRule
    return [
        R("choice-swap", "auxiliary", _ch(o1, o2), _ch(o2, o1), _swap, _swap,
          "weights swapped"),
        R("choice-left-certain", "auxiliary", _ch(o1, o2), o1, _left_certain, None,
          "right weight 0"),
        R("choice-right-certain", "auxiliary", _ch(o1, o2), o2, _right_certain, None,
          "left weight 0"),
        R("choice-idem", "auxiliary", _ch(o, o), o),
        R("atf-top", "auxiliary", AllToFinish(o, TOP), o),
        R("bot-atf", "auxiliary", AllToFinish(BOT, o), BOT),
        R("atf-bot", "auxiliary", AllToFinish(o, BOT), BOT),
        R("ftf-bot", "auxiliary", AnyToFinish(o, BOT), o),
        R("top-ftf", "auxiliary", AnyToFinish(TOP, o), TOP),
        R("ftf-top", "auxiliary", AnyToFinish(o, TOP), TOP),
        R("seq-comm", "auxiliary", Seq(o1, o2), Seq(o2, o1)),
        R("atf-comm", "auxiliary", AllToFinish(o1, o2), AllToFinish(o2, o1)),
        R("ftf-comm", "auxiliary", AnyToFinish(o1, o2), AnyToFinish(o2, o1)),
    ]


_CATALOG = tuple(_catalog())
_AUX = tuple(_auxiliary())
_BY_ID = {r.id: r for r in _CATALOG + _AUX}


def rule_catalog() -> list[RewriteRule]:
    return list(_CATALOG)


def auxiliary_rules() -> list[RewriteRule]:
    return list(_AUX)


def get_rule(rule_id: str) -> RewriteRule:
    try:
        return _BY_ID[rule_id]
    except KeyError:
        raise UnknownRule(rule_id) from None


# --------------------------------------------------------------------------
# Paths and traces
# --------------------------------------------------------------------------


def normalize_path(path: str) -> str:
    path = path.strip()
    if path in ("", "root", "."):
        return ""
    if any(c not in "LR" for c in path):
        raise InvalidPath(f"path must be a string of L and R, got {path!r}")
    return path


def subtree(expr: OutcomeExpr, path: str) -> OutcomeExpr:
    node = expr
    for i, step in enumerate(normalize_path(path)):
        kids = node.children()
        if not kids:
            raise InvalidPath(f"path {path!r} leaves the tree at step {i + 1}")
        node = kids[0] if step == "L" else kids[1]
    return node


def replace_at(expr: OutcomeExpr, path: str, new: OutcomeExpr) -> OutcomeExpr:
    path = normalize_path(path)
    if not path:
        return new
    kids = expr.children()
    if not kids:
        raise InvalidPath(f"path {path!r} leaves the tree")
    if path[0] == "L":
        return rebuild(expr, replace_at(kids[0], path[1:], new), kids[1])
    return rebuild(expr, kids[0], replace_at(kids[1], path[1:], new))


@dataclass(frozen=True)
class TraceStep:
    rule_id: str
    path: str
    before: OutcomeExpr
    after: OutcomeExpr
    coefficients: dict
    direction: str = "ltr"

    def text(self, n: int) -> str:
        rid = self.rule_id if self.direction == "ltr" else f"{self.rule_id}:rtl"
        where = self.path or "root"
        return f"{n}: {rid} @ {where} :: {pretty(self.before)} => {pretty(self.after)}"


@dataclass
class RewriteTrace:
    start: OutcomeExpr
    steps: list = field(default_factory=list)

    @property
    def final(self) -> OutcomeExpr:
        return self.replay()

    def to_text(self) -> str:
        return "".join(step.text(i + 1) + "\n" for i, step in enumerate(self.steps))

    def replay(self, start: OutcomeExpr | None = None) -> OutcomeExpr:
        expr = self.start if start is None else start
        for step in self.steps:
            expr = apply_at(expr, step.rule_id, step.path, step.direction)
        return expr

    @classmethod
    def from_text(cls, start: OutcomeExpr, text: str) -> "RewriteTrace":
        """Rebuild a trace from its text form, checking every step."""
        trace = cls(start)
        expr = start
        for line in text.splitlines():
            if not line.strip():
                continue
            head, body = line.split(" :: ", 1)
            _, rest = head.split(": ", 1)
            rid, where = rest.split(" @ ")
            direction = "ltr"
            if rid.endswith(":rtl"):
                rid, direction = rid[:-4], "rtl"
            before_text, after_text = body.split(" => ", 1)
            if subtree(expr, where) != parse(before_text):
                raise RuleMismatch(f"trace line does not replay: {line}")
            expr = apply_at(expr, rid, where, direction, trace)
            if subtree(expr, where) != parse(after_text):
                raise RuleMismatch(f"trace line does not replay: {line}")
        return trace


def apply_at(expr: OutcomeExpr, rule_id: str, path: str = "",
             direction: str = "ltr", trace: RewriteTrace | None = None) -> OutcomeExpr:
    """Apply one rule at the subtree addressed by ``path`` (``L``/``R`` steps)."""
    rule = get_rule(rule_id)
    path = normalize_path(path)
    before = subtree(expr, path)
    after, coeffs = rule.apply(before, direction)
    if trace is not None:
        trace.steps.append(TraceStep(rule_id, path, before, after, coeffs, direction))
    return replace_at(expr, path, after)


# --------------------------------------------------------------------------
# Direct operations
# --------------------------------------------------------------------------

_DIST_NAMES = {Seq: "seq", AllToFinish: "atf", AnyToFinish: "ftf"}


def distribute_choice(expr: OutcomeExpr, side: str | None = None) -> OutcomeExpr:
    """Push an operator through a choice child.

    ``side`` names the position of the choice child (``"left"`` or
    ``"right"``); when omitted the right child is preferred.
    """
    name = _DIST_NAMES.get(type(expr))
    if name is None:
        raise RuleMismatch("distribution needs ->-, /\\ or \\/ at the root")
    if side is None:
        side = "right" if isinstance(expr.right, ProbChoice) else "left"
    if side == "right":
        rule = f"dist-{name}-left"
    elif side == "left":
        rule = f"dist-{name}-right"
    else:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    return apply_at(expr, rule)


_ACC = {Seq: "fail-acc-seq", ProbChoice: "fail-acc-choice", AllToFinish: "fail-acc-atf"}


def accumulate_failure(expr: OutcomeExpr, trace: RewriteTrace | None = None) -> OutcomeExpr:
    """Merge two failing children ``(o1 <[p1]> bot)``, ``(o2 <[p2]> bot)``."""
    if isinstance(expr, AnyToFinish):
        raise NotExtractable(FTF_MESSAGE)
    rule = _ACC.get(type(expr))
    if rule is None:
        raise RuleMismatch("failure accumulation needs ->-, a choice or /\\ at the root")
    return apply_at(expr, rule, "", trace=trace)


class ProperisationResult(NamedTuple):
    expr: OutcomeExpr
    assignment: object
    properised: list


def properise(expr: OutcomeExpr, assignment, names) -> ProperisationResult:
    """Make each named outcome proper, moving its failure into a ``bot`` choice.

    Every ``Base(name)`` becomes ``name <1-i|i> bot`` and the assignment entry
    is replaced by its proper version. Evaluation is unchanged.
    """
    entries = dict(assignment.entries)
    done = []
    for name in dict.fromkeys(names):
        if not assignment.is_assigned(name):
            raise ValueError(f"cannot properise unassigned outcome {name!r}")
        i = assignment.failure_of(name)
        if i == 1:
            raise ValueError(f"cannot properise {name!r}: it never completes")
        expr = substitute(expr, name, ProbChoice(Base(name), BOT, 1 - i, i))
        entries[name] = assignment.proper_entry(name)
        done.append((name, i))
    return ProperisationResult(expr, type(assignment)(assignment.grid, entries), done)


# --------------------------------------------------------------------------
# Normalization and failure extraction
# --------------------------------------------------------------------------

_BOT, _FAIL, _OTHER = "bot", "fail", "other"


def _kind(node: OutcomeExpr) -> str:
    if isinstance(node, Bottom):
        return _BOT
    if (isinstance(node, ProbChoice) and isinstance(node.right, Bottom)
            and node.w_left > 0 and node.w_right > 0 and not isinstance(node.left, Bottom)):
        return _FAIL
    return _OTHER


class _Rewriter:
    def __init__(self, expr: OutcomeExpr, extract: bool):
        self.expr = expr
        self.extract = extract
        self.trace = RewriteTrace(expr)

    def at(self, path):
        return subtree(self.expr, path)

    def apply(self, rule_id, path):
        self.expr = apply_at(self.expr, rule_id, path, trace=self.trace)

    def run(self, path=""):
        node = self.at(path)
        if node.children():
            self.run(path + "L")
            self.run(path + "R")
        self.local(path)

    def local(self, path):
        node = self.at(path)
        if isinstance(node, Seq):
            self._seq(path, node)
        elif isinstance(node, AllToFinish):
            self._atf(path, node)
        elif isinstance(node, AnyToFinish):
            self._ftf(path, node)
        elif isinstance(node, ProbChoice):
            self._choice(path, node)

    def _seq(self, path, node):
        kl, kr = _kind(node.left), _kind(node.right)
        if kl == _BOT:
            self.apply("bot-seq", path)
        elif kr == _BOT:
            self.apply("seq-bot", path)
        elif isinstance(node.left, Top):
            self.apply("top-seq", path)
        elif isinstance(node.right, Top):
            self.apply("seq-top", path)
        elif kl == _FAIL and kr == _FAIL:
            self.apply("fail-acc-seq", path)
            self._settle(path)
        elif kl == _FAIL:
            self.apply("choice-bot-left-commute", path)
            self._settle(path)
        elif kr == _FAIL:
            self.apply("choice-bot-right-commute", path)
            self._settle(path)

    def _atf(self, path, node):
        kl, kr = _kind(node.left), _kind(node.right)
        if kl == _BOT:
            self.apply("bot-atf", path)
        elif kr == _BOT:
            self.apply("atf-bot", path)
        elif isinstance(node.left, Top):
            self.apply("top-atf", path)
        elif isinstance(node.right, Top):
            self.apply("atf-top", path)
        elif kl == _FAIL and kr == _FAIL:
            self.apply("fail-acc-atf", path)
            self._settle(path)
        elif kl == _FAIL:
            self.apply("dist-atf-right", path)
            self.apply("bot-atf", path + "R")
            self._settle(path)
        elif kr == _FAIL:
            self.apply("dist-atf-left", path)
            self.apply("atf-bot", path + "R")
            self._settle(path)

    def _ftf(self, path, node):
        kl, kr = _kind(node.left), _kind(node.right)
        if kl == _BOT:
            self.apply("bot-ftf", path)
        elif kr == _BOT:
            self.apply("ftf-bot", path)
        elif isinstance(node.left, Top):
            self.apply("top-ftf", path)
        elif isinstance(node.right, Top):
            self.apply("ftf-top", path)
        elif self.extract and (kl == _FAIL or kr == _FAIL
                               or contains_bottom(node.left) or contains_bottom(node.right)):
            raise NotExtractable(f"{FTF_MESSAGE} at {path or 'root'}")

    def _choice(self, path, node):
        if node.w_right == 0:
            self.apply("choice-left-certain", path)
            return
        if node.w_left == 0:
            self.apply("choice-right-certain", path)
            return
        kl, kr = _kind(node.left), _kind(node.right)
        if kl == _BOT and kr == _BOT:
            self.apply("choice-bot-collapse", path)
        elif isinstance(node.left, Top) and isinstance(node.right, Top):
            self.apply("choice-top-collapse", path)
        elif kl == _BOT:
            self.apply("choice-swap", path)
            self.local(path)
        elif kr == _BOT:
            if kl == _FAIL:
                # (o <[p]> bot) <[q]> bot
                self.apply("choice-reassoc-right", path)
                self.apply("choice-bot-collapse", path + "R")
        elif kl == _FAIL and kr == _FAIL:
            self.apply("fail-acc-choice", path)
            self._settle(path)
        elif kr == _FAIL:
            self.apply("choice-reassoc-left", path)
            self._settle(path)
        elif kl == _FAIL:
            self.apply("choice-swap", path)
            self.apply("choice-reassoc-left", path)
            self.apply("choice-swap", path + "L")
            self._settle(path)

    def _settle(self, path):
        """Re-normalize after a step that produced ``X <[q]> bot`` at ``path``."""
        self.local(path + "L")
        self.local(path)


def normalize(expr: OutcomeExpr, trace: RewriteTrace | None = None) -> OutcomeExpr:
    """Bottom-up strategy: collapse constants and float failures to the root.

    The result is ``bot``, a ``bot``-free expression, ``core <[q]> bot`` with
    a ``bot``-free core, or (when failure sits under first-to-finish) a term
    with the trapped failure left in place.
    """
    rw = _Rewriter(expr, extract=False)
    rw.run()
    if trace is not None:
        trace.steps.extend(rw.trace.steps)
    return rw.expr


class Extraction(NamedTuple):
    core: OutcomeExpr
    failure: Fraction
    trace: RewriteTrace


def extract_failure(expr: OutcomeExpr) -> Extraction:
    """Split ``expr`` into a ``bot``-free core and an exact failure probability.

    ``expr`` is equivalent to ``core <[1 - failure]> bot``. The returned trace
    rewrites ``expr`` into that form. Raises :class:`NotExtractable` when a
    failure is trapped under first-to-finish.
    """
    rw = _Rewriter(expr, extract=True)
    rw.run()
    out = rw.expr
    kind = _kind(out)
    if kind == _BOT:
        return Extraction(TOP, Fraction(1), rw.trace)
    if kind == _FAIL and not contains_bottom(out.left):
        return Extraction(out.left, out.w_right / (out.w_left + out.w_right), rw.trace)
    if contains_bottom(out):
        raise NotExtractable(f"could not isolate failure in {pretty(out)}")
    return Extraction(out, Fraction(0), rw.trace)
