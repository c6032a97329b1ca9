"""Analytic expressions of one complex variable.

The expression class is deliberately small: rational operations, integer
powers and ``exp``.  That is enough for every labelling map and coefficient
path used by the package while keeping every expression single valued.

Grammar (whitespace insignificant)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | power
    power  := atom ('^' exponent)?
    exponent := ['-'] INT ('^' exponent)? | '(' ['-'] INT ')'
    atom   := NUMBER | 'i' | IDENT | IDENT '(' expr ')' | '(' expr ')'

``^`` binds tighter than unary minus, so ``-z^2`` is ``-(z^2)``.  The only
function is ``exp``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .errors import (
    ExprSyntaxError,
    NonIntegerExponentError,
    PoleError,
    UnboundVariableError,
    UnknownFunctionError,
)

Number = Union[int, float, complex]


class Expr:
    """Base class of the immutable expression tree."""

    __slots__ = ()

    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, n: int):
        if not isinstance(n, int):
            raise TypeError("only integer powers are supported")
        return powi(self, n)

    def __str__(self) -> str:
        return to_source(self)


@dataclass(frozen=True, eq=True, repr=True)
class Const(Expr):
    value: complex

    def __post_init__(self):
        v = complex(self.value)
        if not (math.isfinite(v.real) and math.isfinite(v.imag)):
            raise ValueError(f"non-finite constant {v!r}")
        object.__setattr__(self, "value", v)


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Div(Expr):
    left: Expr
    right: Expr

    def __post_init__(self):
        if isinstance(self.right, Const) and self.right.value == 0:
            raise PoleError("division by the constant zero")


@dataclass(frozen=True)
class PowInt(Expr):
    base: Expr
    exponent: int

    def __post_init__(self):
        if not isinstance(self.exponent, int) or isinstance(self.exponent, bool):
            raise TypeError("PowInt exponent must be an int")


@dataclass(frozen=True)
class Exp(Expr):
    arg: Expr


ZERO = Const(0)
ONE = Const(1)
I = Const(1j)


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, str):
        return parse(value)
    return Const(complex(value))


# -- smart constructors: constant folding and zero/one elimination only -----

def _is(e: Expr, v: complex) -> bool:
    return isinstance(e, Const) and e.value == v


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if _is(a, 0):
        return b
    if _is(b, 0):
        return a
    if isinstance(b, Neg):
        return Sub(a, b.arg)
    return Add(a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if _is(b, 0):
        return a
    if _is(a, 0):
        return neg(b)
    return Sub(a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if _is(a, 0) or _is(b, 0):
        return ZERO
    if _is(a, 1):
        return b
    if _is(b, 1):
        return a
    if _is(a, -1):
        return neg(b)
    if _is(b, -1):
        return neg(a)
    return Mul(a, b)


def div(a: Expr, b: Expr) -> Expr:
    if isinstance(b, Const) and b.value == 0:
        raise PoleError("division by the constant zero")
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value / b.value)
    if _is(a, 0):
        return ZERO
    if _is(b, 1):
        return a
    return Div(a, b)


def powi(a: Expr, n: int) -> Expr:
    if n == 0:
        return ONE
    if n == 1:
        return a
    if isinstance(a, Const):
        if a.value == 0 and n < 0:
            raise PoleError("zero raised to a negative power")
        return Const(a.value ** n)
    return PowInt(a, n)


def exp(a: Expr) -> Expr:
    if _is(a, 0):
        return ONE
    return Exp(a)


# -- parsing ----------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()]))"
)

FUNCTIONS = {"exp": Exp}


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        n = len(source)
        while pos < n:
            if source[pos].isspace():
                pos += 1
                continue
            m = _TOKEN.match(source, pos)
            if m is None or m.end() == pos:
                raise ExprSyntaxError(f"unexpected character {source[pos]!r}", pos)
            kind = m.lastgroup
            start = m.start(kind)
            self.tokens.append((kind, m.group(kind), start))
            pos = m.end()
        self.tokens.append(("eof", "", n))
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def take(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> None:
        kind, value, pos = self.take()
        if value != text or kind != "op":
            found = value or "end of input"
            raise ExprSyntaxError(f"expected {text!r}, found {found!r}", pos)

    def parse(self) -> Expr:
        e = self.expr()
        kind, value, pos = self.peek()
        if kind != "eof":
            raise ExprSyntaxError(f"unexpected token {value!r}", pos)
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            right = self.term()
            left = _fold(Add if op == "+" else Sub, left, right)
        return left

    def term(self) -> Expr:
        left = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op, pos = self.take()[1:]
            right = self.factor()
            if op == "/" and isinstance(right, Const) and right.value == 0:
                raise ExprSyntaxError("division by the constant zero", pos)
            left = _fold(Mul if op == "*" else Div, left, right)
        return left

    def factor(self) -> Expr:
        if self.peek()[:2] == ("op", "-"):
            self.take()
            arg = self.factor()
            return Const(-arg.value) if isinstance(arg, Const) else Neg(arg)
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            pos = self.take()[2]
            n = self.exponent()
            if isinstance(base, Const):
                if base.value == 0 and n < 0:
                    raise ExprSyntaxError("zero raised to a negative power", pos)
                return Const(base.value ** n)
            return PowInt(base, n)
        return base

    def exponent(self) -> int:
        if self.peek()[:2] == ("op", "("):
            self.take()
            n = self._signed_int()
            self.expect(")")
        else:
            n = self._signed_int()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            m = self.exponent()
            if m < 0:
                raise NonIntegerExponentError("exponent evaluates to a non-integer", self.peek()[2])
            n = n ** m
        return n

    def _signed_int(self) -> int:
        sign = 1
        if self.peek()[:2] == ("op", "-"):
            self.take()
            sign = -1
        kind, value, pos = self.take()
        if kind != "num":
            raise NonIntegerExponentError(f"exponent must be an integer literal, found {value or 'end of input'!r}", pos)
        if not value.isdigit():
            raise NonIntegerExponentError(f"non-integer exponent {value!r}", pos)
        return sign * int(value)

    def atom(self) -> Expr:
        kind, value, pos = self.take()
        if kind == "num":
            return Const(float(value))
        if kind == "ident":
            if self.peek()[:2] == ("op", "("):
                if value not in FUNCTIONS:
                    raise UnknownFunctionError(f"unknown function {value!r}", pos)
                self.take()
                arg = self.expr()
                self.expect(")")
                return FUNCTIONS[value](arg)
            if value == "i":
                return Const(1j)
            if value in FUNCTIONS:
                raise ExprSyntaxError(f"function {value!r} needs an argument", pos)
            return Var(value)
        if (kind, value) == ("op", "("):
            e = self.expr()
            self.expect(")")
            return e
        raise ExprSyntaxError(f"unexpected {value or 'end of input'!r}", pos)


def _fold(cls, left: Expr, right: Expr) -> Expr:
    # Fold literal-only subtrees so printed complex constants read back as one Const.
    if isinstance(left, Const) and isinstance(right, Const):
        a, b = left.value, right.value
        if cls is Add:
            return Const(a + b)
        if cls is Sub:
            return Const(a - b)
        if cls is Mul:
            return Const(a * b)
        return Const(a / b)
    return cls(left, right)


def parse(source: str) -> Expr:
    """Parse ``source`` into an expression tree."""
    return _Parser(source).parse()


# -- printing ---------------------------------------------------------------

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _real(x: float) -> str:
    if x.is_integer() and abs(x) < 1e16:
        return str(int(x)) if x != 0 or math.copysign(1, x) > 0 else "0"
    return repr(x)


def _const_source(v: complex) -> tuple[str, int]:
    re_, im = v.real, v.imag
    if im == 0:
        if re_ < 0:
            return f"(-{_real(-re_)})", _PREC_ATOM
        return _real(re_), _PREC_ATOM
    if v == 1j:
        return "i", _PREC_ATOM
    imag = "i" if abs(im) == 1 else f"{_real(abs(im))}*i"
    if re_ == 0:
        return (f"(-{imag})" if im < 0 else f"({imag})"), _PREC_ATOM
    sign = "-" if im < 0 else "+"
    if re_ < 0:
        return f"(-{_real(-re_)}{sign}{imag})", _PREC_ATOM
    return f"({_real(re_)}{sign}{imag})", _PREC_ATOM


def _source(e: Expr) -> tuple[str, int]:
    if isinstance(e, Const):
        return _const_source(e.value)
    if isinstance(e, Var):
        return e.name, _PREC_ATOM
    if isinstance(e, Exp):
        return f"exp({_source(e.arg)[0]})", _PREC_ATOM
    if isinstance(e, Neg):
        return "-" + _wrap(e.arg, _PREC_NEG), _PREC_NEG
    if isinstance(e, PowInt):
        n = str(e.exponent) if e.exponent >= 0 else f"({e.exponent})"
        return f"{_wrap(e.base, _PREC_ATOM)}^{n}", _PREC_POW
    ops = {Add: ("+", _PREC_ADD), Sub: ("-", _PREC_ADD), Mul: ("*", _PREC_MUL), Div: ("/", _PREC_MUL)}
    symbol, prec = ops[type(e)]
    left = _wrap(e.left, prec)
    right = _wrap(e.right, prec + 1)
    if prec == _PREC_ADD:
        return f"{left} {symbol} {right}", prec
    return f"{left}{symbol}{right}", prec


def _wrap(e: Expr, min_prec: int) -> str:
    text, prec = _source(e)
    return text if prec >= min_prec else f"({text})"


def to_source(e: Expr) -> str:
    """Render ``e`` in the input grammar; ``parse(to_source(e))`` evaluates identically."""
    return _source(e)[0]


# -- evaluation ---------------------------------------------------------------

def evaluate(e: Expr, bindings: Mapping[str, object] | None = None, **values):
    """Evaluate ``e`` with complex arithmetic.

    Bound values may be scalars or numpy arrays (broadcast elementwise).  A
    scalar result is returned as ``complex``; array inputs give a complex array,
    in extended precision when any bound value is a ``longdouble`` array.
    Raises :class:`PoleError` on division by zero or a non-finite result.
    """
    env = dict(bindings or {})
    env.update(values)
    extended = any(np.asarray(v).dtype in (np.longdouble, np.clongdouble) for v in env.values())
    dtype = np.clongdouble if extended else complex
    arrays = {k: np.asarray(v, dtype=dtype) for k, v in env.items()}
    with np.errstate(all="ignore"):
        out = _eval(e, arrays)
    out = np.asarray(out, dtype=dtype)
    if not np.all(np.isfinite(out)):
        raise PoleError(f"non-finite value evaluating {to_source(e)}")
    if out.ndim == 0:
        return complex(out)
    return out


def _eval(e: Expr, env: dict):
    if isinstance(e, Const):
        return np.complex128(e.value)
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise UnboundVariableError(e.name) from None
    if isinstance(e, Add):
        return _eval(e.left, env) + _eval(e.right, env)
    if isinstance(e, Sub):
        return _eval(e.left, env) - _eval(e.right, env)
    if isinstance(e, Mul):
        return _eval(e.left, env) * _eval(e.right, env)
    if isinstance(e, Div):
        den = _eval(e.right, env)
        if np.any(den == 0):
            raise PoleError(f"pole: {to_source(e.right)} vanishes")
        return _eval(e.left, env) / den
    if isinstance(e, Neg):
        return -_eval(e.arg, env)
    if isinstance(e, PowInt):
        base = _eval(e.base, env)
        if e.exponent < 0:
            if np.any(base == 0):
                raise PoleError(f"pole: {to_source(e.base)} vanishes")
            return 1.0 / _ipow(base, -e.exponent)
        return _ipow(base, e.exponent)
    if isinstance(e, Exp):
        return np.exp(_eval(e.arg, env))
    raise TypeError(f"not an expression: {e!r}")


def _ipow(x, n: int):
    # Binary exponentiation so scalars and arrays share one rounding path.
    result = None
    while n:
        if n & 1:
            result = x if result is None else result * x
        n >>= 1
        if n:
            x = x * x
    return np.complex128(1.0) if result is None else result


# -- symbolic calculus --------------------------------------------------------

def differentiate(e: Expr, var: str) -> Expr:
    """Exact derivative of ``e`` with respect to ``var``."""
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == var else ZERO
    if isinstance(e, Neg):
        return neg(differentiate(e.arg, var))
    if isinstance(e, Add):
        return add(differentiate(e.left, var), differentiate(e.right, var))
    if isinstance(e, Sub):
        return sub(differentiate(e.left, var), differentiate(e.right, var))
    if isinstance(e, Mul):
        da = differentiate(e.left, var)
        db = differentiate(e.right, var)
        return add(mul(da, e.right), mul(e.left, db))
    if isinstance(e, Div):
        da = differentiate(e.left, var)
        db = differentiate(e.right, var)
        if _is(db, 0):
            return div(da, e.right)
        return div(sub(mul(da, e.right), mul(e.left, db)), powi(e.right, 2))
    if isinstance(e, PowInt):
        db = differentiate(e.base, var)
        if e.exponent == 0 or _is(db, 0):
            return ZERO
        return mul(mul(Const(e.exponent), powi(e.base, e.exponent - 1)), db)
    if isinstance(e, Exp):
        return mul(e, differentiate(e.arg, var))
    raise TypeError(f"not an expression: {e!r}")


def free_vars(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Const):
        return set()
    if isinstance(e, (Neg, Exp)):
        return free_vars(e.arg)
    if isinstance(e, PowInt):
        return free_vars(e.base)
    return free_vars(e.left) | free_vars(e.right)


def conjugate_coefficients(e: Expr) -> Expr:
    """Expression ``z -> conj(e(conj z))`` (all literal constants conjugated).

    Named parameters are left alone; callers conjugate their bound values.
    """
    if isinstance(e, Const):
        return Const(e.value.conjugate())
    if isinstance(e, Var):
        return e
    if isinstance(e, Neg):
        return Neg(conjugate_coefficients(e.arg))
    if isinstance(e, Exp):
        return Exp(conjugate_coefficients(e.arg))
    if isinstance(e, PowInt):
        return PowInt(conjugate_coefficients(e.base), e.exponent)
    return type(e)(conjugate_coefficients(e.left), conjugate_coefficients(e.right))


def substitute(e: Expr, values: Mapping[str, Expr]) -> Expr:
    """Replace variables by expressions, folding constants on the way."""
    if isinstance(e, Var):
        return values.get(e.name, e)
    if isinstance(e, Const):
        return e
    if isinstance(e, Neg):
        return neg(substitute(e.arg, values))
    if isinstance(e, Exp):
        return exp(substitute(e.arg, values))
    if isinstance(e, PowInt):
        return powi(substitute(e.base, values), e.exponent)
    build = {Add: add, Sub: sub, Mul: mul, Div: div}[type(e)]
    return build(substitute(e.left, values), substitute(e.right, values))


def is_constant(e: Expr, var: str) -> bool:
    return var not in free_vars(e)
