"""Outcome expressions: AST, concrete syntax, and substitution.

Concrete grammar (whitespace-insensitive, ``#`` starts a comment)::

    expr   := choice
    choice := ftf ( "<" num "|" num ">" ftf | "<[" num "]>" ftf )?
    ftf    := atf ( "\\/" atf )*
    atf    := seq ( "/\\" seq )*
    seq    := atom ( "->-" atom )*
    atom   := "top" | "bot" | identifier | "(" expr ")"
    num    := decimal | decimal "/" decimal

Sequential composition binds tightest, then all-to-finish, then
any-to-finish, then probabilistic choice. Chains of ``->-``, ``/\\`` and
``\\/`` associate to the left. Probabilistic choice does not associate, so a
chain of choices must be parenthesized.

Weights are kept as exact :class:`fractions.Fraction` values. Floats passed
by Python callers are read through their shortest ``repr`` so that
``0.9999999999999999`` means exactly ``1 - 1e-16``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import Iterator, Union

RESERVED = frozenset({"top", "bot"})
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")

Weight = Union[Fraction, int, float, str, Decimal]


def as_fraction(value: Weight) -> Fraction:
    """Coerce a weight or probability to an exact fraction.

    Floats go through ``repr`` so the decimal the user wrote is what is kept.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not weights")
    if isinstance(value, float):
        if value != value or value in (float("inf"), float("-inf")):
            raise ValueError(f"weight must be finite, got {value!r}")
        return Fraction(repr(value))
    return Fraction(value)


class ParseError(ValueError):
    """Raised for malformed expression text; carries a 1-based location."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.message = message
        self.line = line
        self.column = column


# --------------------------------------------------------------------------
# AST
# --------------------------------------------------------------------------


class OutcomeExpr:
    """Base class of all outcome-expression nodes.

    Nodes are immutable and hash structurally, so equal subtrees share memo
    entries during evaluation.
    """

    __slots__ = ()

    def children(self) -> tuple["OutcomeExpr", ...]:
        return ()

    def __str__(self) -> str:
        return pretty(self)


def _cached_hash(node) -> int:
    h = node._hash
    if h is None:
        h = hash((type(node).__name__,) + node._key())
        object.__setattr__(node, "_hash", h)
    return h


@dataclass(frozen=True, eq=True)
class Base(OutcomeExpr):
    name: str

    def __post_init__(self):
        if not isinstance(self.name, str) or not _IDENT_RE.match(self.name):
            raise ValueError(f"invalid identifier {self.name!r}")
        if self.name in RESERVED:
            raise ValueError(f"{self.name!r} is a reserved word")


@dataclass(frozen=True, eq=True)
class Top(OutcomeExpr):
    pass


@dataclass(frozen=True, eq=True)
class Bottom(OutcomeExpr):
    pass


@dataclass(frozen=True, eq=True)
class _Binary(OutcomeExpr):
    left: OutcomeExpr
    right: OutcomeExpr
    _hash: int | None = field(default=None, init=False, compare=False, repr=False)

    def children(self):
        return (self.left, self.right)

    def _key(self):
        return (self.left, self.right)

    def __hash__(self):
        return _cached_hash(self)


@dataclass(frozen=True, eq=True)
class Seq(_Binary):
    """Sequential composition: delays add."""

    __hash__ = _Binary.__hash__


@dataclass(frozen=True, eq=True)
class AllToFinish(_Binary):
    """Both branches must finish (maximum of delays)."""

    __hash__ = _Binary.__hash__


@dataclass(frozen=True, eq=True)
class AnyToFinish(_Binary):
    """The first branch to finish wins (minimum of delays)."""

    __hash__ = _Binary.__hash__


@dataclass(frozen=True, eq=True)
class ProbChoice(OutcomeExpr):
    """Choose ``left`` with weight ``w_left`` and ``right`` with ``w_right``.

    Weights are stored as given; they are normalized only when evaluated.
    """

    left: OutcomeExpr
    right: OutcomeExpr
    w_left: Fraction = Fraction(1)
    w_right: Fraction = Fraction(1)
    _hash: int | None = field(default=None, init=False, compare=False, repr=False)

    def __post_init__(self):
        wl, wr = as_fraction(self.w_left), as_fraction(self.w_right)
        if wl < 0 or wr < 0:
            raise ValueError("choice weights must be nonnegative")
        if wl + wr <= 0:
            raise ValueError("choice weights must not both be zero")
        object.__setattr__(self, "w_left", wl)
        object.__setattr__(self, "w_right", wr)

    @classmethod
    def with_prob(cls, left, right, p: Weight) -> "ProbChoice":
        """The ``left <[p]> right`` shorthand: weights ``(p, 1 - p)``."""
        p = as_fraction(p)
        if not 0 <= p <= 1:
            raise ValueError(f"probability {p} outside [0, 1]")
        return cls(left, right, p, 1 - p)

    @property
    def p_left(self) -> Fraction:
        return self.w_left / (self.w_left + self.w_right)

    @property
    def p_right(self) -> Fraction:
        return self.w_right / (self.w_left + self.w_right)

    def children(self):
        return (self.left, self.right)

    def _key(self):
        return (self.left, self.right, self.w_left, self.w_right)

    def __hash__(self):
        return _cached_hash(self)


BINARY_TYPES = (Seq, AllToFinish, AnyToFinish, ProbChoice)


def rebuild(node: OutcomeExpr, left: OutcomeExpr, right: OutcomeExpr) -> OutcomeExpr:
    """Copy a binary node with new children, keeping its weights."""
    if isinstance(node, ProbChoice):
        return ProbChoice(left, right, node.w_left, node.w_right)
    return type(node)(left, right)


def walk(expr: OutcomeExpr) -> Iterator[OutcomeExpr]:
    """Preorder traversal."""
    stack = [expr]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(node.children()))


def base_names(expr: OutcomeExpr) -> list[str]:
    """Distinct base-outcome names in order of first appearance."""
    seen: dict[str, None] = {}
    for node in walk(expr):
        if isinstance(node, Base):
            seen.setdefault(node.name)
    return list(seen)


def contains_bottom(expr: OutcomeExpr) -> bool:
    return any(isinstance(node, Bottom) for node in walk(expr))


def size(expr: OutcomeExpr) -> int:
    return sum(1 for _ in walk(expr))


def substitute(expr: OutcomeExpr, name: str, replacement: OutcomeExpr) -> OutcomeExpr:
    """Replace every ``Base(name)`` leaf by ``replacement``."""
    if isinstance(expr, Base):
        return replacement if expr.name == name else expr
    if isinstance(expr, BINARY_TYPES):
        left = substitute(expr.left, name, replacement)
        right = substitute(expr.right, name, replacement)
        if left is expr.left and right is expr.right:
            return expr
        return rebuild(expr, left, right)
    return expr


# --------------------------------------------------------------------------
# Printing
# --------------------------------------------------------------------------

_OP_TEXT = {Seq: "->-", AllToFinish: "/\\", AnyToFinish: "\\/"}


def format_number(value: Fraction) -> str:
    """Exact text for a nonnegative fraction.

    Terminating decimals print as decimals, anything else as ``n/d``.
    """
    value = as_fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    d = value.denominator
    twos = fives = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d != 1:
        return f"{value.numerator}/{value.denominator}"
    digits = max(twos, fives)
    scaled = value * 10**digits
    assert scaled.denominator == 1
    text = str(abs(scaled.numerator)).rjust(digits + 1, "0")
    whole, frac = text[:-digits], text[-digits:].rstrip("0")
    sign = "-" if value < 0 else ""
    return f"{sign}{whole}.{frac}" if frac else f"{sign}{whole}"


def pretty(expr: OutcomeExpr) -> str:
    """Fully parenthesized text that parses back to the same tree."""
    if isinstance(expr, Top):
        return "top"
    if isinstance(expr, Bottom):
        return "bot"
    if isinstance(expr, Base):
        return expr.name
    left, right = pretty(expr.left), pretty(expr.right)
    if isinstance(expr, ProbChoice):
        if expr.w_left + expr.w_right == 1:
            op = f"<[{format_number(expr.w_left)}]>"
        else:
            op = f"<{format_number(expr.w_left)}|{format_number(expr.w_right)}>"
        return f"({left} {op} {right})"
    return f"({left} {_OP_TEXT[type(expr)]} {right})"


# --------------------------------------------------------------------------
# Parsing
# --------------------------------------------------------------------------

_NUM = r"-?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?"
_TOKEN_RE = re.compile(
    rf"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<seq>->-)
  | (?P<atf>/\\)
  | (?P<ftf>\\/)
  | (?P<lprob><\[)
  | (?P<rprob>\]>)
  | (?P<num>{_NUM}(?:/{_NUM})?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<lt><)
  | (?P<gt>>)
  | (?P<bar>\|)
  | (?P<lpar>\()
  | (?P<rpar>\))
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unknown token {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), line, pos - line_start + 1))
        chunk = m.group()
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    tokens.append(_Token("eof", "", line, pos - line_start + 1))
    return tokens


def _number(tok: _Token) -> Fraction:
    try:
        if "/" in tok.text:
            num, den = tok.text.split("/")
            return Fraction(Decimal(num)) / Fraction(Decimal(den))
        return Fraction(Decimal(tok.text))
    except (ArithmeticError, ValueError) as exc:
        raise ParseError(f"bad number {tok.text!r}", tok.line, tok.column) from exc


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str, what: str) -> _Token:
        if self.tok.kind != kind:
            self.fail(f"expected {what}, found {self.describe(self.tok)}")
        return self.advance()

    def fail(self, message: str, tok: _Token | None = None):
        tok = tok or self.tok
        raise ParseError(message, tok.line, tok.column)

    @staticmethod
    def describe(tok: _Token) -> str:
        return "end of input" if tok.kind == "eof" else repr(tok.text)

    def parse(self) -> OutcomeExpr:
        expr = self.choice()
        if self.tok.kind != "eof":
            self.fail(f"unexpected {self.describe(self.tok)}")
        return expr

    def choice(self) -> OutcomeExpr:
        left = self.ftf()
        tok = self.tok
        if tok.kind == "lt":
            self.advance()
            wl_tok = self.expect("num", "a weight")
            self.expect("bar", "'|'")
            wr_tok = self.expect("num", "a weight")
            self.expect("gt", "'>'")
            wl, wr = _number(wl_tok), _number(wr_tok)
            for w, t in ((wl, wl_tok), (wr, wr_tok)):
                if w < 0:
                    self.fail(f"weight out of range: {t.text} is negative", t)
            if wl + wr == 0:
                self.fail("weight out of range: both weights are zero", wl_tok)
            right = self.ftf()
            node = ProbChoice(left, right, wl, wr)
        elif tok.kind == "lprob":
            self.advance()
            p_tok = self.expect("num", "a probability")
            self.expect("rprob", "']>'")
            p = _number(p_tok)
            if not 0 <= p <= 1:
                self.fail(f"weight out of range: {p_tok.text} is not in [0, 1]", p_tok)
            right = self.ftf()
            node = ProbChoice(left, right, p, 1 - p)
        else:
            return left
        if self.tok.kind in ("lt", "lprob"):
            self.fail("probabilistic choice is not associative; add parentheses")
        return node

    def _chain(self, sub, kind: str, cls) -> OutcomeExpr:
        node = sub()
        while self.tok.kind == kind:
            self.advance()
            node = cls(node, sub())
        return node

    def ftf(self) -> OutcomeExpr:
        return self._chain(self.atf, "ftf", AnyToFinish)

    def atf(self) -> OutcomeExpr:
        return self._chain(self.seq, "atf", AllToFinish)

    def seq(self) -> OutcomeExpr:
        return self._chain(self.atom, "seq", Seq)

    def atom(self) -> OutcomeExpr:
        tok = self.tok
        if tok.kind == "ident":
            self.advance()
            if tok.text == "top":
                return Top()
            if tok.text == "bot":
                return Bottom()
            return Base(tok.text)
        if tok.kind == "lpar":
            self.advance()
            inner = self.choice()
            self.expect("rpar", "')'")
            return inner
        self.fail(f"expected an outcome, found {self.describe(tok)}")


def parse(text: str) -> OutcomeExpr:
    """Parse the concrete syntax into an :class:`OutcomeExpr`."""
    return _Parser(text).parse()


TOP = Top()
BOT = Bottom()
