"""Small arithmetic expression language for kernels K(x, t) and terms g(x).

Grammar (recursive descent, no implicit multiplication)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' unary)?          # right associative
    primary := NUMBER | VAR | FUNC '(' expr ')' | '(' expr ')'

Variables are ``x`` and ``t``; functions are ``sin cos exp ln abs sqrt``.
Evaluation accepts floats or numpy arrays and raises :class:`EvalError`
instead of producing non-finite values.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

VARIABLES = ("x", "t")
FUNCTIONS = ("sin", "cos", "exp", "ln", "abs", "sqrt")

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


class ExprSyntaxError(ValueError):
    """Parse failure with the byte offset of the offending token."""

    kind = "syntax"

    def __init__(self, message: str, offset: int, source: str = ""):
        self.offset = offset
        self.source = source
        super().__init__(f"{self.kind}: {message} at offset {offset}")


class UnknownIdentifierError(ExprSyntaxError):
    kind = "unknown-identifier"


class UnbalancedParenError(ExprSyntaxError):
    kind = "unbalanced-parenthesis"


class DanglingOperatorError(ExprSyntaxError):
    kind = "dangling-operator"


class EvalError(ArithmeticError):
    """Domain error during evaluation; ``node`` is the failing sub-expression."""

    def __init__(self, message: str, node: "Expr"):
        self.node = node
        super().__init__(f"{message} in '{to_string(node)}'")


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


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
    func: str
    arg: "Expr"


Expr = Union[Num, Var, Neg, BinOp, Call]


# ---------------------------------------------------------------------------
# Lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
  | (?P<bad>.)
    """,
    re.VERBOSE,
)


class _Token(NamedTuple):
    kind: str  # 'num', 'ident', 'op', 'end'
    text: str
    offset: int


def _tokenize(src: str) -> list[_Token]:
    tokens = []
    for m in _TOKEN_RE.finditer(src):
        kind = m.lastgroup
        if kind == "ws":
            continue
        if kind == "bad":
            raise ExprSyntaxError(f"unexpected character {m.group()!r}", m.start(), src)
        tokens.append(_Token(kind, m.group(), m.start()))
    tokens.append(_Token("end", "", len(src)))
    return tokens


# ---------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0
        self.depth = 0
        self.tok = self.tokens[0]

    def advance(self) -> _Token:
        tok = self.tok
        self.i += 1
        if self.i < len(self.tokens):
            self.tok = self.tokens[self.i]
        return tok

    def parse(self) -> Expr:
        node = self.expr()
        tok = self.tok
        if tok.kind != "end":
            if tok.text == ")":
                raise UnbalancedParenError("unmatched ')'", tok.offset, self.src)
            raise ExprSyntaxError(f"unexpected token {tok.text!r}", tok.offset, self.src)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.tok.text in ("*", "/") and self.tok.kind == "op":
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def primary(self) -> Expr:
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "ident":
            self.advance()
            if tok.text in VARIABLES:
                return Var(tok.text)
            if tok.text in FUNCTIONS:
                if not (self.tok.kind == "op" and self.tok.text == "("):
                    raise ExprSyntaxError(
                        f"expected '(' after function {tok.text!r}", self.tok.offset, self.src
                    )
                return Call(tok.text, self.group())
            raise UnknownIdentifierError(f"unknown identifier {tok.text!r}", tok.offset, self.src)
        if tok.kind == "op" and tok.text == "(":
            return self.group()
        if tok.kind == "end":
            if self.i > 0 and self.tokens[self.i - 1].text in "+-*/^":
                raise DanglingOperatorError(
                    f"operator {self.tokens[self.i - 1].text!r} has no right operand",
                    tok.offset,
                    self.src,
                )
            raise ExprSyntaxError("unexpected end of input", tok.offset, self.src)
        if tok.kind == "op" and tok.text in "+*/^":
            raise DanglingOperatorError(f"unexpected operator {tok.text!r}", tok.offset, self.src)
        if tok.text == ")":
            raise UnbalancedParenError("unexpected ')'", tok.offset, self.src)
        raise ExprSyntaxError(f"unexpected token {tok.text!r}", tok.offset, self.src)

    def group(self) -> Expr:
        open_tok = self.advance()
        node = self.expr()
        if not (self.tok.kind == "op" and self.tok.text == ")"):
            if self.tok.kind == "end":
                raise UnbalancedParenError(
                    f"'(' at offset {open_tok.offset} is never closed", self.tok.offset, self.src
                )
            raise ExprSyntaxError(f"expected ')' but found {self.tok.text!r}", self.tok.offset, self.src)
        self.advance()
        return node


def parse(src: str) -> Expr:
    """Parse ``src`` into an expression tree.

    Raises a subclass of :class:`ExprSyntaxError` carrying ``offset``.
    """
    return _Parser(src).parse()


# ---------------------------------------------------------------------------
# Printing


def _fmt_num(v: float) -> str:
    text = repr(float(v))
    return text


def to_string(e: Expr) -> str:
    """Render with the minimum parentheses needed to reparse to the same tree."""
    return _show(e)


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return _PREC["neg"]
    return 10


def _show(e: Expr) -> str:
    if isinstance(e, Num):
        return _fmt_num(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({_show(e.arg)})"
    if isinstance(e, Neg):
        inner = _show(e.operand)
        # '-' binds looser than '^' but tighter than '*'; operand of a Neg may
        # be another Neg or anything at '^' level or above.
        if _prec(e.operand) < _PREC["neg"]:
            inner = f"({inner})"
        return f"-{inner}"
    p = _PREC[e.op]
    left = _show(e.left)
    right = _show(e.right)
    if e.op == "^":
        # base must be a primary; exponent may be a unary or another power
        if _prec(e.left) <= p:
            left = f"({left})"
        if _prec(e.right) < _PREC["neg"]:
            right = f"({right})"
        return f"{left}^{right}"
    if _prec(e.left) < p:
        left = f"({left})"
    if _prec(e.right) <= p:
        right = f"({right})"
    return f"{left} {e.op} {right}"


# ---------------------------------------------------------------------------
# Evaluation


def _check(value, node: Expr, what: str):
    if isinstance(value, float):
        finite = math.isfinite(value)
    else:
        finite = np.all(np.isfinite(value))
    if not finite:
        raise EvalError(f"{what} produced a non-finite value", node)
    return value


def _eval(e: Expr, x, t):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return x if e.name == "x" else t
    if isinstance(e, Neg):
        return -_eval(e.operand, x, t)
    if isinstance(e, Call):
        a = _eval(e.arg, x, t)
        if e.func == "ln":
            if np.any(np.asarray(a) <= 0):
                raise EvalError("ln of a nonpositive value", e)
            return np.log(a)
        if e.func == "sqrt":
            if np.any(np.asarray(a) < 0):
                raise EvalError("sqrt of a negative value", e)
            return np.sqrt(a)
        if e.func == "exp":
            with np.errstate(over="ignore"):
                return _check(np.exp(a), e, "exp")
        return {"sin": np.sin, "cos": np.cos, "abs": np.abs}[e.func](a)
    a = _eval(e.left, x, t)
    b = _eval(e.right, x, t)
    if e.op == "+":
        return _check(np.add(a, b), e, "addition")
    if e.op == "-":
        return _check(np.subtract(a, b), e, "subtraction")
    if e.op == "*":
        return _check(np.multiply(a, b), e, "multiplication")
    if e.op == "/":
        if np.any(np.asarray(b) == 0):
            raise EvalError("division by zero", e)
        return _check(np.divide(a, b), e, "division")
    base = np.asarray(a, dtype=float)
    expo = np.asarray(b, dtype=float)
    if np.any((base == 0) & (expo < 0)):
        raise EvalError("zero raised to a negative power", e)
    if np.any((base < 0) & (expo != np.round(expo))):
        raise EvalError("negative base with non-integer exponent", e)
    with np.errstate(over="ignore", invalid="ignore"):
        return _check(np.power(base, expo), e, "power")


def evaluate(e: Expr, x=0.0, t=0.0):
    """Evaluate ``e`` at ``(x, t)``; scalars in give a float out, arrays broadcast."""
    with np.errstate(all="ignore"):
        out = _eval(e, x, t)
    if np.ndim(out) == 0 and np.ndim(x) == 0 and np.ndim(t) == 0:
        return float(out)
    return np.broadcast_to(np.asarray(out, dtype=float), np.broadcast(x, t).shape).copy()


def variables(e: Expr) -> set[str]:
    """Names of the variables that occur in ``e``."""
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Num):
        return set()
    if isinstance(e, (Neg,)):
        return variables(e.operand)
    if isinstance(e, Call):
        return variables(e.arg)
    return variables(e.left) | variables(e.right)


def compile_expr(src: str):
    """Parse ``src`` and return a callable ``f(x, t=0.0)``."""
    tree = parse(src)

    def f(x, t=0.0):
        return evaluate(tree, x, t)

    f.tree = tree
    f.source = src
    return f
