"""Complex arithmetic expressions in the variables ``z`` and ``w``.

Grammar (precedence high to low, same-precedence operators left-associative)::

    atom    := number | number "i" | "i" | "z" | "w" | "(" expr ")"
    power   := atom ("^" ["+"|"-"] integer)*
    unary   := ("-"|"+") unary | power
    product := unary (("*"|"/") unary)*
    expr    := product (("+"|"-") product)*

Only integer exponents are accepted, so every expression is meromorphic.
Subtrees built only from literals are folded at parse time, and ``1/x^n`` is
stored as ``x^-n``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .errors import EvalPole, ExprSyntaxError, UnknownIdentifier

POLE_TOL = 1e-300


@dataclass(frozen=True)
class Lit:
    re: float
    im: float = 0.0

    def __post_init__(self):
        # normalise -0.0 so printing is stable
        object.__setattr__(self, "re", float(self.re) + 0.0)
        object.__setattr__(self, "im", float(self.im) + 0.0)

    @property
    def value(self) -> complex:
        return complex(self.re, self.im)

    @classmethod
    def of(cls, c) -> "Lit":
        c = complex(c)
        return cls(c.real, c.imag)


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class Add:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Sub:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Mul:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Div:
    left: "Expr"
    right: "Expr"  # divisor, checked against POLE_TOL on evaluation


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exp: int


Expr = Union[Lit, Var, Neg, Add, Sub, Mul, Div, Pow]

Z = Var("z")
W = Var("w")

# ---------------------------------------------------------------------------
# tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<pow>\*\*|\^)
  | (?P<op>[-+*/()])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # num | inum | ident | op | end
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExprSyntaxError(pos, ["number", "identifier", "operator"], text)
        kind = m.lastgroup
        s = m.group()
        if kind == "num":
            # "2i" is an imaginary literal; "2iz" is not
            end = m.end()
            if end < len(text) and text[end] == "i" and not (
                end + 1 < len(text) and (text[end + 1].isalnum() or text[end + 1] == "_")
            ):
                toks.append(_Tok("inum", s, pos))
                pos = end + 1
                continue
            toks.append(_Tok("num", s, pos))
        elif kind == "ident":
            toks.append(_Tok("ident", s, pos))
        elif kind == "pow":
            toks.append(_Tok("op", "^", pos))
        elif kind == "op":
            toks.append(_Tok("op", s, pos))
        pos = m.end()
    toks.append(_Tok("end", "", len(text)))
    return toks


# ---------------------------------------------------------------------------
# literal folding used by the parser


def _fold(node: Expr) -> Expr:
    if isinstance(node, Neg) and isinstance(node.arg, Lit):
        return Lit.of(-node.arg.value)
    if isinstance(node, Pow) and isinstance(node.base, Lit):
        b = node.base.value
        if node.exp < 0 and b == 0:
            return node
        return Lit.of(b**node.exp)
    if isinstance(node, (Add, Sub, Mul, Div)):
        a, b = node.left, node.right
        if isinstance(a, Lit) and isinstance(b, Lit):
            x, y = a.value, b.value
            if isinstance(node, Add):
                return Lit.of(x + y)
            if isinstance(node, Sub):
                return Lit.of(x - y)
            if isinstance(node, Mul):
                return Lit.of(x * y)
            if y != 0:
                return Lit.of(x / y)
            return node
        if isinstance(node, Div) and a == Lit(1.0):
            if isinstance(b, Pow):
                return Pow(b.base, -b.exp)
            if isinstance(b, Var):
                return Pow(b, -1)
    return node


class _Parser:
    _BINARY = {"+": 1, "-": 1, "*": 2, "/": 2}

    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def fail(self, expected):
        raise ExprSyntaxError(self.tok.pos, expected, self.text)

    def parse(self) -> Expr:
        if self.tok.kind == "end":
            self.fail(["expression"])
        e = self.expression(1)
        if self.tok.kind != "end":
            self.fail(["operator", "end of input"])
        return e

    def expression(self, min_prec: int) -> Expr:
        left = self.unary()
        while self.tok.kind == "op" and self._BINARY.get(self.tok.text, 0) >= min_prec:
            op = self.advance().text
            prec = self._BINARY[op]
            right = self.expression(prec + 1)
            cls = {"+": Add, "-": Sub, "*": Mul, "/": Div}[op]
            left = _fold(cls(left, right))
        return left

    def unary(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return _fold(Neg(self.unary()))
        if self.tok.kind == "op" and self.tok.text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        while self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            base = _fold(Pow(base, self.signed_int()))
        return base

    def signed_int(self) -> int:
        if self.tok.kind == "op" and self.tok.text == "(":
            self.advance()
            n = self.signed_int()
            if not (self.tok.kind == "op" and self.tok.text == ")"):
                self.fail([")"])
            self.advance()
            return n
        sign = 1
        if self.tok.kind == "op" and self.tok.text in "+-":
            sign = -1 if self.advance().text == "-" else 1
        t = self.tok
        if t.kind != "num" or not t.text.isdigit():
            self.fail(["integer exponent"])
        self.advance()
        return sign * int(t.text)

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.advance()
            return Lit(float(t.text))
        if t.kind == "inum":
            self.advance()
            return Lit(0.0, float(t.text))
        if t.kind == "ident":
            self.advance()
            if t.text in ("z", "w"):
                return Var(t.text)
            if t.text == "i":
                return Lit(0.0, 1.0)
            raise UnknownIdentifier(t.text, t.pos)
        if t.kind == "op" and t.text == "(":
            self.advance()
            e = self.expression(1)
            if not (self.tok.kind == "op" and self.tok.text == ")"):
                self.fail([")"])
            self.advance()
            return e
        self.fail(["number", "z", "w", "i", "("])


def parse_expr(text: str) -> Expr:
    """Parse ``text`` into an expression tree.

    Raises :class:`ExprSyntaxError` (with ``position`` and ``expected``) or
    :class:`UnknownIdentifier`.
    """
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# printing

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4}


def _fmt_real(x: float) -> str:
    if math.isfinite(x) and x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _lit_str(c: Lit) -> tuple[str, int]:
    if c.im == 0 and c.re >= 0:
        return _fmt_real(c.re), 5
    if c.re == 0 and c.im > 0:
        return ("i" if c.im == 1 else _fmt_real(c.im) + "i"), 5
    if c.im == 0:
        return f"({_fmt_real(c.re)})", 5
    if c.re == 0:
        return f"(-{_fmt_real(-c.im)}i)", 5
    sign = "+" if c.im > 0 else "-"
    return f"({_fmt_real(c.re)}{sign}{_fmt_real(abs(c.im))}i)", 5


def _to_str(e: Expr) -> tuple[str, int]:
    if isinstance(e, Lit):
        return _lit_str(e)
    if isinstance(e, Var):
        return e.name, 5
    prec = _PREC[type(e)]
    if isinstance(e, Neg):
        s, p = _to_str(e.arg)
        return "-" + (f"({s})" if p < prec else s), prec
    if isinstance(e, Pow):
        s, p = _to_str(e.base)
        return (f"({s})" if p <= prec and not isinstance(e.base, Pow) else s) + f"^{e.exp}", prec
    ls, lp = _to_str(e.left)
    rs, rp = _to_str(e.right)
    op = {Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(e)]
    if lp < prec:
        ls = f"({ls})"
    if rp <= prec:
        rs = f"({rs})"
    sep = f" {op} " if prec == 1 else op
    return ls + sep + rs, prec


def to_string(e: Expr) -> str:
    """Canonical text form; ``parse_expr(to_string(e)) == e`` for parsed trees."""
    return _to_str(e)[0]


# ---------------------------------------------------------------------------
# evaluation


def _near_zero(x) -> bool:
    return bool(np.any(np.abs(x) < POLE_TOL))


def eval_expr(e: Expr, z, w):
    """Evaluate ``e`` at ``(z, w)``; scalars or numpy arrays.

    Raises :class:`EvalPole` when a divisor or the base of a negative power is
    within 1e-300 of zero.
    """
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Var):
        return z if e.name == "z" else w
    if isinstance(e, Neg):
        return -eval_expr(e.arg, z, w)
    if isinstance(e, Pow):
        b = eval_expr(e.base, z, w)
        if e.exp < 0 and _near_zero(b):
            raise EvalPole(e)
        if isinstance(b, complex | float | int):
            return complex(b) ** e.exp
        return np.asarray(b, dtype=complex) ** e.exp
    a = eval_expr(e.left, z, w)
    b = eval_expr(e.right, z, w)
    if isinstance(e, Add):
        return a + b
    if isinstance(e, Sub):
        return a - b
    if isinstance(e, Mul):
        return a * b
    if _near_zero(b):
        raise EvalPole(e)
    return a / b


def _codegen(e: Expr, nodes: list) -> str:
    if isinstance(e, Lit):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{_codegen(e.arg, nodes)})"
    if isinstance(e, Pow):
        if e.exp < 0:
            nodes.append(e)
            return f"_pw({_codegen(e.base, nodes)}, {e.exp}, {len(nodes) - 1})"
        return f"(({_codegen(e.base, nodes)})**{e.exp})"
    a, b = _codegen(e.left, nodes), _codegen(e.right, nodes)
    if isinstance(e, Add):
        return f"({a} + {b})"
    if isinstance(e, Sub):
        return f"({a} - {b})"
    if isinstance(e, Mul):
        return f"({a} * {b})"
    nodes.append(e)
    return f"({a} / _dv({b}, {len(nodes) - 1}))"


def compile_expr(e: Expr) -> Callable:
    """Return a fast ``f(z, w)`` equivalent to ``eval_expr(e, z, w)``."""
    nodes: list = []
    body = _codegen(e, nodes)

    def _dv(b, k):
        if _near_zero(b):
            raise EvalPole(nodes[k])
        return b

    def _pw(b, n, k):
        if _near_zero(b):
            raise EvalPole(nodes[k])
        return b**n

    fn = eval(f"lambda z, w: {body}", {"_dv": _dv, "_pw": _pw})  # noqa: S307 - generated from the AST
    fn.__doc__ = to_string(e)
    return fn


# ---------------------------------------------------------------------------
# differentiation with light simplification

ZERO = Lit(0.0)
ONE = Lit(1.0)


def _is(e: Expr, c: complex) -> bool:
    return isinstance(e, Lit) and e.value == c


def mk_neg(a: Expr) -> Expr:
    if isinstance(a, Lit):
        return Lit.of(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def mk_add(a: Expr, b: Expr) -> Expr:
    if _is(a, 0):
        return b
    if _is(b, 0):
        return a
    if isinstance(a, Lit) and isinstance(b, Lit):
        return Lit.of(a.value + b.value)
    return Add(a, b)


def mk_sub(a: Expr, b: Expr) -> Expr:
    if _is(b, 0):
        return a
    if _is(a, 0):
        return mk_neg(b)
    if isinstance(a, Lit) and isinstance(b, Lit):
        return Lit.of(a.value - b.value)
    return Sub(a, b)


def mk_mul(a: Expr, b: Expr) -> Expr:
    if _is(a, 0) or _is(b, 0):
        return ZERO
    if _is(a, 1):
        return b
    if _is(b, 1):
        return a
    if isinstance(a, Lit) and isinstance(b, Lit):
        return Lit.of(a.value * b.value)
    if isinstance(b, Lit):
        a, b = b, a
    if isinstance(a, Lit) and isinstance(b, Mul) and isinstance(b.left, Lit):
        return mk_mul(Lit.of(a.value * b.left.value), b.right)
    return Mul(a, b)


def mk_div(a: Expr, b: Expr) -> Expr:
    if _is(a, 0):
        return ZERO
    if _is(b, 1):
        return a
    if isinstance(a, Lit) and isinstance(b, Lit) and b.value != 0:
        return Lit.of(a.value / b.value)
    if _is(a, 1) and isinstance(b, (Pow, Var)):
        return mk_pow(b, -1)
    return Div(a, b)


def mk_pow(b: Expr, n: int) -> Expr:
    if n == 0:
        return ONE
    if n == 1:
        return b
    if isinstance(b, Lit) and (n > 0 or b.value != 0):
        return Lit.of(b.value**n)
    if isinstance(b, Pow):
        return mk_pow(b.base, b.exp * n)
    return Pow(b, n)


def diff_expr(e: Expr, var: str) -> Expr:
    """Symbolic partial derivative of ``e`` with respect to ``var`` ('z' or 'w')."""
    if var not in ("z", "w"):
        raise ValueError(f"var must be 'z' or 'w', got {var!r}")
    if isinstance(e, Lit):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == var else ZERO
    if isinstance(e, Neg):
        return mk_neg(diff_expr(e.arg, var))
    if isinstance(e, Add):
        return mk_add(diff_expr(e.left, var), diff_expr(e.right, var))
    if isinstance(e, Sub):
        return mk_sub(diff_expr(e.left, var), diff_expr(e.right, var))
    if isinstance(e, Mul):
        da, db = diff_expr(e.left, var), diff_expr(e.right, var)
        return mk_add(mk_mul(da, e.right), mk_mul(e.left, db))
    if isinstance(e, Div):
        da, db = diff_expr(e.left, var), diff_expr(e.right, var)
        if _is(db, 0):
            return mk_div(da, e.right)
        num = mk_sub(mk_mul(da, e.right), mk_mul(e.left, db))
        return mk_div(num, mk_pow(e.right, 2))
    if isinstance(e, Pow):
        db = diff_expr(e.base, var)
        return mk_mul(mk_mul(Lit(float(e.exp)), mk_pow(e.base, e.exp - 1)), db)
    raise TypeError(f"not an expression node: {e!r}")


def free_vars(e: Expr) -> set[str]:
    if isinstance(e, Lit):
        return set()
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Neg):
        return free_vars(e.arg)
    if isinstance(e, Pow):
        return free_vars(e.base)
    return free_vars(e.left) | free_vars(e.right)


def polynomial(coeffs, var: str = "w") -> Expr:
    """Expression ``sum_k coeffs[k] * var^k`` (zero coefficients skipped)."""
    x = Var(var)
    out: Expr = ZERO
    for k, c in enumerate(coeffs):
        if c == 0:
            continue
        out = mk_add(out, mk_mul(Lit.of(c), mk_pow(x, k)))
    return out


def as_expr(obj) -> Expr:
    """Accept an expression tree, a string, or a number."""
    if isinstance(obj, (Lit, Var, Neg, Add, Sub, Mul, Div, Pow)):
        return obj
    if isinstance(obj, str):
        return parse_expr(obj)
    return Lit.of(complex(obj))
