"""Recursive-descent parser for one-variable test functions.

Grammar (lowest to highest precedence)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?            # right associative
    atom   := NUMBER | 'x' | NAME '(' expr (',' expr)* ')' | '(' expr ')'

so ``-x^2`` is ``-(x^2)`` and ``2^3^2`` is ``2^9``.  Evaluation works on
floats and numpy arrays alike.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from sublim.errors import ExprError

MAX_DEPTH = 100

FUNCTIONS = {
    "exp": (1, np.exp),
    "sin": (1, np.sin),
    "cos": (1, np.cos),
    "tanh": (1, np.tanh),
    "abs": (1, np.abs),
    "min": (2, np.minimum),
    "max": (2, np.maximum),
    "clamp": (3, None),
}


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Expr = Union[Num, Var, Neg, BinOp, Call]

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


class Token(NamedTuple):
    kind: str
    text: str
    offset: int


def tokenize(text: str) -> list[Token]:
    tokens, pos = [], 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExprError(f"unexpected character {text[pos]!r}", _byte_offset(text, pos))
        if m.lastgroup != "ws":
            tokens.append(Token(m.lastgroup, m.group(), _byte_offset(text, pos)))
        pos = m.end()
    tokens.append(Token("end", "", _byte_offset(text, len(text))))
    return tokens


def _byte_offset(text: str, pos: int) -> int:
    return len(text[:pos].encode("utf-8", "surrogatepass"))


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0
        self.depth = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        if self.tok.text != text:
            found = self.tok.text or "end of input"
            raise ExprError(f"expected {text!r}, found {found!r}", self.tok.offset)
        return self.advance()

    def enter(self):
        self.depth += 1
        if self.depth > MAX_DEPTH:
            raise ExprError("expression nested too deeply", self.tok.offset)

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "end":
            raise ExprError(f"unexpected {self.tok.text!r}", self.tok.offset)
        return e

    def expr(self) -> Expr:
        self.enter()
        left = self.term()
        while self.tok.text in ("+", "-"):
            op = self.advance().text
            left = BinOp(op, left, self.term())
        self.depth -= 1
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.tok.text in ("*", "/"):
            op = self.advance().text
            left = BinOp(op, left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.tok.text == "-":
            self.advance()
            self.enter()
            e = Neg(self.unary())
            self.depth -= 1
            return e
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.tok.text == "^":
            self.advance()
            self.enter()
            e = BinOp("^", base, self.unary())
            self.depth -= 1
            return e
        return base

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.advance()
            value = float(t.text)
            if not np.isfinite(value):
                raise ExprError(f"number {t.text!r} out of range", t.offset)
            return Num(value)
        if t.kind == "name":
            self.advance()
            if t.text == "x":
                return Var()
            if t.text not in FUNCTIONS:
                raise ExprError(f"unknown identifier {t.text!r}", t.offset)
            self.expect("(")
            args = [self.expr()]
            while self.tok.text == ",":
                self.advance()
                args.append(self.expr())
            self.expect(")")
            arity = FUNCTIONS[t.text][0]
            if len(args) != arity:
                raise ExprError(f"{t.text} takes {arity} argument(s), got {len(args)}", t.offset)
            return Call(t.text, tuple(args))
        if t.text == "(":
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        found = t.text or "end of input"
        raise ExprError(f"unexpected {found!r}", t.offset)


def parse_expr(text: str | bytes) -> Expr:
    """Parse ``text``; every failure is an ``ExprError`` carrying a byte offset."""
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ExprError("input is not valid UTF-8", exc.start) from None
    try:
        return _Parser(text).parse()
    except RecursionError:
        raise ExprError("expression nested too deeply") from None


def evaluate(e: Expr, x):
    """Evaluate at a float or array ``x``."""
    if isinstance(e, Num):
        return e.value if np.ndim(x) == 0 else np.full(np.shape(x), e.value)
    if isinstance(e, Var):
        return x
    if isinstance(e, Neg):
        return -evaluate(e.operand, x)
    if isinstance(e, BinOp):
        a, b = evaluate(e.left, x), evaluate(e.right, x)
        with np.errstate(all="ignore"):
            if e.op == "+":
                return a + b
            if e.op == "-":
                return a - b
            if e.op == "*":
                return a * b
            if e.op == "/":
                if np.any(np.asarray(b) == 0):
                    raise ExprError("division by zero")
                return a / b
            out = np.power(np.asarray(a, dtype=float), b)
            return float(out) if np.ndim(out) == 0 else out
    if isinstance(e, Call):
        args = [evaluate(a, x) for a in e.args]
        if e.name == "clamp":
            v, lo, hi = args
            if np.any(np.asarray(lo) > np.asarray(hi)):
                raise ExprError("clamp(e, a, b) needs a <= b")
            out = np.minimum(np.maximum(v, lo), hi)
        else:
            with np.errstate(all="ignore"):
                out = FUNCTIONS[e.name][1](*args)
        return float(out) if np.ndim(out) == 0 else out
    raise TypeError(f"not an expression node: {e!r}")


def _fmt_num(v: float) -> str:
    return repr(float(v))


def to_source(e: Expr) -> str:
    """Fully parenthesized source text that reparses to the same tree."""
    if isinstance(e, Num):
        return _fmt_num(e.value)
    if isinstance(e, Var):
        return "x"
    if isinstance(e, Neg):
        return f"(-{to_source(e.operand)})"
    if isinstance(e, BinOp):
        return f"({to_source(e.left)} {e.op} {to_source(e.right)})"
    return f"{e.name}({', '.join(to_source(a) for a in e.args)})"


def _mentions_x(e: Expr) -> bool:
    if isinstance(e, Var):
        return True
    if isinstance(e, Neg):
        return _mentions_x(e.operand)
    if isinstance(e, BinOp):
        return _mentions_x(e.left) or _mentions_x(e.right)
    if isinstance(e, Call):
        return any(_mentions_x(a) for a in e.args)
    return False


class Bounds(NamedTuple):
    bound: float
    lipschitz: float
    sampled: bool
    growing: bool


SAMPLES = 10_000
SAFETY = 1.25


def infer_bounds(e: Expr, L: float) -> Bounds:
    """Sampled sup-norm and Lipschitz bounds on [-2L, 2L], inflated by 1.25.

    ``growing`` flags functions whose magnitude is still rising at the edge of
    the sampling window; those are unfit for clamped grids.
    """
    if not L > 0:
        raise ExprError("domain radius must be positive")
    if not _mentions_x(e):
        c = float(evaluate(e, 0.0))
        if not np.isfinite(c):
            raise ExprError("constant is not finite")
        return Bounds(abs(c), 0.0, False, False)
    xs = np.linspace(-2 * L, 2 * L, SAMPLES)
    ys = np.asarray(evaluate(e, xs), dtype=float)
    if ys.shape != xs.shape:
        ys = np.broadcast_to(ys, xs.shape)
    if not np.all(np.isfinite(ys)):
        raise ExprError("function is not finite on the sampling window")
    mags = np.abs(ys)
    top = mags.max()
    edge = SAMPLES // 100
    tol = 1e-9 * max(1.0, top)
    growing = bool(
        (mags[-1] >= top - tol and mags[-1] > mags[-edge] + tol)
        or (mags[0] >= top - tol and mags[0] > mags[edge - 1] + tol)
    )
    slope = np.abs(np.diff(ys)) / (xs[1] - xs[0])
    return Bounds(SAFETY * float(top), SAFETY * float(slope.max()), True, growing)
