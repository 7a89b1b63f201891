"""Scalar field expressions in ``x1``, ``x2``, ``t`` with exact derivatives.

The grammar is deliberately small::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' ['-'] INTEGER)?
    atom   := NUMBER | 'pi' | VAR | FUNC '(' expr ')' | '(' expr ')'

with ``VAR`` one of ``x1, x2, t`` and ``FUNC`` one of ``sin, cos, exp``.
``**`` is accepted as a synonym for ``^``.  Exponents are integer literals.

Trees are immutable and support the arithmetic operators, so derived fields
(forcings, Laplacians) are built symbolically::

    >>> ys = parse("x1*x2*(1-x1)*(1-x2)")
    >>> lap = diff(diff(ys, "x1"), "x1") + diff(diff(ys, "x2"), "x2")
    >>> lap(0.5, 0.5)
    -1.0
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import EvaluationError, ExprSyntaxError

__all__ = ["Expr", "Const", "Var", "Binary", "Neg", "Pow", "Call",
           "parse", "diff", "evaluate", "to_string", "const", "PI",
           "VARIABLES", "FUNCTIONS", "gradient", "laplacian"]

VARIABLES = ("x1", "x2", "t")
FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


class Expr:
    """Base class of expression nodes."""

    __slots__ = ()
    precedence = _PREC_ATOM

    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __rtruediv__(self, other):
        return div(_wrap(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, n):
        return power(self, n)

    def __call__(self, x1, x2, t=0.0):
        return evaluate(self, x1, x2, t)

    def __str__(self):
        return to_string(self)

    def nodes(self):
        yield self

    def uses_transcendental(self):
        return any(isinstance(n, Call) for n in self.nodes())


@dataclass(frozen=True, repr=False)
class Const(Expr):
    value: float
    name: str = ""

    @property
    def precedence(self):
        return _PREC_NEG if self.value < 0 and not self.name else _PREC_ATOM

    def __repr__(self):
        return f"Const({self.name or self.value!r})"


@dataclass(frozen=True, repr=False)
class Var(Expr):
    name: str

    def __repr__(self):
        return f"Var({self.name})"


@dataclass(frozen=True, repr=False)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr

    @property
    def precedence(self):
        return _PREC_ADD if self.op in "+-" else _PREC_MUL

    def nodes(self):
        yield self
        yield from self.left.nodes()
        yield from self.right.nodes()

    def __repr__(self):
        return f"Binary({self.op!r}, {self.left!r}, {self.right!r})"


@dataclass(frozen=True, repr=False)
class Neg(Expr):
    arg: Expr
    precedence = _PREC_NEG

    def nodes(self):
        yield self
        yield from self.arg.nodes()

    def __repr__(self):
        return f"Neg({self.arg!r})"


@dataclass(frozen=True, repr=False)
class Pow(Expr):
    base: Expr
    exponent: int
    precedence = _PREC_POW

    def nodes(self):
        yield self
        yield from self.base.nodes()

    def __repr__(self):
        return f"Pow({self.base!r}, {self.exponent})"


@dataclass(frozen=True, repr=False)
class Call(Expr):
    func: str
    arg: Expr

    def nodes(self):
        yield self
        yield from self.arg.nodes()

    def __repr__(self):
        return f"Call({self.func}, {self.arg!r})"


PI = Const(math.pi, "pi")
ZERO = Const(0.0)
ONE = Const(1.0)


def const(value):
    return Const(float(value))


def _wrap(x):
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float, np.floating, np.integer)):
        return const(x)
    return NotImplemented


def _is(e, value):
    return isinstance(e, Const) and e.value == value


# -- builders with constant folding -------------------------------------------

def add(a, b):
    if isinstance(a, Const) and isinstance(b, Const) and not (a.name or b.name):
        return const(a.value + b.value)
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    if isinstance(b, Neg):
        return sub(a, b.arg)
    if isinstance(a, Neg):
        return sub(b, a.arg)
    return Binary("+", a, b)


def sub(a, b):
    if isinstance(a, Const) and isinstance(b, Const) and not (a.name or b.name):
        return const(a.value - b.value)
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return neg(b)
    if isinstance(b, Neg):
        return add(a, b.arg)
    return Binary("-", a, b)


def mul(a, b):
    if _is(a, 0.0) or _is(b, 0.0):
        return ZERO
    if isinstance(a, Const) and isinstance(b, Const) and not (a.name or b.name):
        return const(a.value * b.value)
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    if _is(a, -1.0):
        return neg(b)
    if _is(b, -1.0):
        return neg(a)
    return Binary("*", a, b)


def div(a, b):
    if _is(a, 0.0) and not _is(b, 0.0):
        return ZERO
    if _is(b, 1.0):
        return a
    if (isinstance(a, Const) and isinstance(b, Const)
            and not (a.name or b.name) and b.value != 0.0):
        return const(a.value / b.value)
    return Binary("/", a, b)


def neg(a):
    if isinstance(a, Const) and not a.name:
        return const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def power(a, n):
    if int(n) != n:
        raise ValueError("only integer exponents are supported")
    n = int(n)
    if n == 0:
        return ONE
    if n == 1:
        return a
    if isinstance(a, Const) and not a.name:
        return const(a.value ** n)
    return Pow(a, n)


def call(func, a):
    return Call(func, a)


# -- parsing ------------------------------------------------------------------

_SINGLE = set("+-*/^()")


def _tokenize(text):
    try:
        text.encode("ascii")
    except UnicodeEncodeError as exc:
        raise ExprSyntaxError("non-ASCII character", exc.start) from None
    tokens = []
    pos, n = 0, len(text)
    while pos < n:
        ch = text[pos]
        if ch.isspace():
            pos += 1
        elif text.startswith("**", pos):
            tokens.append(("op", "^", pos))
            pos += 2
        elif ch in _SINGLE:
            tokens.append(("op", ch, pos))
            pos += 1
        elif ch.isdigit() or (ch == "." and pos + 1 < n and text[pos + 1].isdigit()):
            start = pos
            while pos < n and (text[pos].isdigit() or text[pos] == "."):
                pos += 1
            if pos < n and text[pos] in "eE":
                look = pos + 1
                if look < n and text[look] in "+-":
                    look += 1
                if look < n and text[look].isdigit():
                    pos = look
                    while pos < n and text[pos].isdigit():
                        pos += 1
            literal = text[start:pos]
            try:
                float(literal)
            except ValueError:
                raise ExprSyntaxError(f"bad number {literal!r}", start) from None
            tokens.append(("num", literal, start))
        elif ch.isalpha() or ch == "_":
            start = pos
            while pos < n and (text[pos].isalnum() or text[pos] == "_"):
                pos += 1
            tokens.append(("name", text[start:pos], start))
        else:
            raise ExprSyntaxError(f"unexpected character {ch!r}", pos)
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, pos = self.take()
        if val != value or kind == "end":
            raise ExprSyntaxError(f"expected {value!r}", pos)

    def parse(self):
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {val!r}", pos)
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            e = Binary(op, e, rhs)
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            e = Binary(op, e, rhs)
        return e

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            sign = 1
            if self.peek()[:2] == ("op", "-"):
                self.take()
                sign = -1
            kind, val, pos = self.take()
            if kind != "num" or not val.isdigit():
                raise ExprSyntaxError("exponent must be an integer literal", pos)
            return Pow(base, sign * int(val))
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "name":
            if val == "pi":
                return PI
            if val in VARIABLES:
                return Var(val)
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            raise ExprSyntaxError(f"unknown identifier {val!r}", pos)
        if (kind, val) == ("op", "("):
            e = self.expr()
            self.expect(")")
            return e
        if kind == "end":
            raise ExprSyntaxError("unexpected end of input", pos)
        raise ExprSyntaxError(f"unexpected {val!r}", pos)


def parse(text):
    """Parse ``text`` into an expression tree (no simplification)."""
    return _Parser(text).parse()


# -- printing -----------------------------------------------------------------

def _fmt_number(v):
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def to_string(e):
    """Render ``e`` with the minimal parentheses that re-parse to the same tree."""
    if isinstance(e, Const):
        if e.name:
            return e.name
        return _fmt_number(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({to_string(e.arg)})"
    if isinstance(e, Neg):
        return "-" + _paren(e.arg, _PREC_NEG, strict=False)
    if isinstance(e, Pow):
        # a negative literal base would re-parse as a negation of the power
        return f"{_paren(e.base, _PREC_POW, strict=True)}^{e.exponent}"
    if isinstance(e, Binary):
        p = e.precedence
        return (f"{_paren(e.left, p, strict=False)}{e.op}"
                f"{_paren(e.right, p, strict=True)}")
    raise TypeError(f"not an expression: {e!r}")


def _paren(e, prec, strict):
    s = to_string(e)
    if e.precedence < prec or (strict and e.precedence == prec):
        return f"({s})"
    return s


# -- evaluation ---------------------------------------------------------------

def evaluate(e, x1, x2, t=0.0):
    """Evaluate in IEEE double precision; arrays broadcast elementwise."""
    env = {"x1": np.asarray(x1, dtype=float), "x2": np.asarray(x2, dtype=float),
           "t": np.asarray(t, dtype=float)}
    out = _eval(e, env)
    if np.ndim(out) == 0:
        return float(out)
    return np.broadcast_to(out, np.broadcast_shapes(
        env["x1"].shape, env["x2"].shape, env["t"].shape)).astype(float)


def _eval(e, env):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, Binary):
        a = _eval(e.left, env)
        b = _eval(e.right, env)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if np.any(np.asarray(b) == 0.0):
            raise EvaluationError(f"division by zero in {to_string(e)}")
        return a / b
    if isinstance(e, Neg):
        return -_eval(e.arg, env)
    if isinstance(e, Pow):
        base = _eval(e.base, env)
        if e.exponent < 0 and np.any(np.asarray(base) == 0.0):
            raise EvaluationError(f"division by zero in {to_string(e)}")
        return np.asarray(base, dtype=float) ** e.exponent
    if isinstance(e, Call):
        return FUNCTIONS[e.func](_eval(e.arg, env))
    raise TypeError(f"not an expression: {e!r}")


# -- differentiation ----------------------------------------------------------

def diff(e, var):
    """Exact partial derivative of ``e`` with respect to ``var``."""
    if var not in VARIABLES:
        raise ValueError(f"unknown variable {var!r}")
    return _diff(e, var)


def _diff(e, var):
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == var else ZERO
    if isinstance(e, Neg):
        return neg(_diff(e.arg, var))
    if isinstance(e, Binary):
        a, b = e.left, e.right
        da, db = _diff(a, var), _diff(b, var)
        if e.op == "+":
            return add(da, db)
        if e.op == "-":
            return sub(da, db)
        if e.op == "*":
            return add(mul(da, b), mul(a, db))
        return div(sub(mul(da, b), mul(a, db)), power(b, 2))
    if isinstance(e, Pow):
        n = e.exponent
        return mul(mul(const(n), power(e.base, n - 1)), _diff(e.base, var))
    if isinstance(e, Call):
        du = _diff(e.arg, var)
        if e.func == "sin":
            outer = call("cos", e.arg)
        elif e.func == "cos":
            outer = neg(call("sin", e.arg))
        else:
            outer = e
        if _is(du, 0.0):
            return ZERO
        if isinstance(outer, Neg):
            return neg(mul(du, outer.arg))
        return mul(du, outer)
    raise TypeError(f"not an expression: {e!r}")


def gradient(e):
    return diff(e, "x1"), diff(e, "x2")


def laplacian(e):
    return add(diff(diff(e, "x1"), "x1"), diff(diff(e, "x2"), "x2"))
