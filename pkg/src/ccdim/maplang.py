"""A small expression language for branch maps.

Grammar (whitespace is insignificant)::

    expr     := term (('+' | '-') term)*
    term     := unary (('*' | '/') unary)*
    unary    := '-' unary | power
    power    := primary ('^' exponent)?
    exponent := ['-'] NUMBER | '(' ['-'] NUMBER ')'
    primary  := NUMBER | 'x' | ('sqrt' | 'exp' | 'log') '(' expr ')' | '(' expr ')'

Exponents are literals so that :func:`differentiate` is total and closed-form.
Expressions compile to a postfix program (:class:`Program`) which the numeric
kernels evaluate over arrays.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainFault, ParseError

FUNCTIONS = ("sqrt", "exp", "log")


class Expr:
    """Base class of expression nodes. Nodes are immutable and hashable."""

    __slots__ = ()

    def __str__(self) -> str:
        return to_string(self)

    def __call__(self, x: float) -> float:
        return evaluate(self, x)


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    pass


@dataclass(frozen=True)
class BinOp(Expr):
    op: str  # one of + - * /
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: float


@dataclass(frozen=True)
class Func(Expr):
    name: str
    arg: Expr


X = Var()


# --------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if m is None or m.lastgroup is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.take()
        if val != value or kind != "op":
            found = "end of input" if kind == "end" else repr(val)
            raise ParseError(f"expected {value!r}, found {found}", pos)

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {val!r}", pos)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            e = BinOp(op, e, self.term())
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            e = BinOp(op, e, self.unary())
        return e

    def unary(self) -> Expr:
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            base = Pow(base, self.exponent())
            if self.peek()[:2] == ("op", "^"):
                raise ParseError("non-literal exponent", self.peek()[2])
        return base

    def exponent(self) -> float:
        start = self.peek()[2]
        paren = self.peek()[:2] == ("op", "(")
        if paren:
            self.take()
        sign = 1.0
        if self.peek()[:2] == ("op", "-"):
            self.take()
            sign = -1.0
        kind, val, _ = self.peek()
        if kind != "num":
            raise ParseError("non-literal exponent", start)
        self.take()
        if paren:
            if self.peek()[:2] != ("op", ")"):
                raise ParseError("non-literal exponent", start)
            self.take()
        return sign * float(val)

    def primary(self) -> Expr:
        kind, val, pos = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            if val == "x":
                return X
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Func(val, arg)
            raise ParseError(f"unknown identifier {val!r}", pos)
        if (kind, val) == ("op", "("):
            e = self.expr()
            self.expect(")")
            return e
        found = "end of input" if kind == "end" else repr(val)
        raise ParseError(f"unexpected {found}", pos)


def parse(text: str) -> Expr:
    """Parse an expression in the variable ``x``.

    Raises :class:`ParseError` carrying a 0-based character position.
    """
    if not isinstance(text, str) or not text.strip():
        raise ParseError("empty expression", 0)
    return _Parser(text).parse()


# --------------------------------------------------------------------------
# printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return 3
    if isinstance(e, Pow):
        return 4
    return 5


def _fmt_num(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def to_string(e: Expr) -> str:
    """Render with the minimal parentheses that reparse to the same tree."""
    if isinstance(e, Num):
        s = _fmt_num(e.value)
        return f"({s})" if e.value < 0 or s.startswith("-") else s
    if isinstance(e, Var):
        return "x"
    if isinstance(e, Func):
        return f"{e.name}({to_string(e.arg)})"
    if isinstance(e, Neg):
        inner = to_string(e.operand)
        return "-" + (f"({inner})" if _prec(e.operand) < 4 else inner)
    if isinstance(e, Pow):
        base = to_string(e.base)
        if _prec(e.base) < 5 or (isinstance(e.base, Num) and e.base.value < 0):
            base = f"({base})"
        p = _fmt_num(e.exponent)
        return f"{base}^{p}" if e.exponent >= 0 else f"{base}^({p})"
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        left, right = to_string(e.left), to_string(e.right)
        if _prec(e.left) < p:
            left = f"({left})"
        if _prec(e.right) <= p:
            right = f"({right})"
        sep = f" {e.op} " if p == 1 else e.op
        return f"{left}{sep}{right}"
    raise TypeError(f"not an expression node: {e!r}")


# --------------------------------------------------------------------------
# folding constructors


def _is(e: Expr, v: float) -> bool:
    return isinstance(e, Num) and e.value == v


def add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    if _is(a, 0):
        return b
    if _is(b, 0):
        return a
    return BinOp("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    if _is(b, 0):
        return a
    if _is(a, 0):
        return neg(b)
    return BinOp("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if isinstance(b, Num) and not isinstance(a, Num):
        a, b = b, a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    if _is(a, 0):
        return Num(0.0)
    if _is(a, 1):
        return b
    if _is(a, -1):
        return neg(b)
    if isinstance(a, Num) and isinstance(b, BinOp) and b.op == "*" and isinstance(b.left, Num):
        return mul(Num(a.value * b.left.value), b.right)
    return BinOp("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Num) and isinstance(b, Num) and b.value != 0:
        return Num(a.value / b.value)
    if _is(a, 0):
        return Num(0.0)
    if _is(b, 1):
        return a
    return BinOp("/", a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.operand
    return Neg(a)


def power(a: Expr, p: float) -> Expr:
    if p == 0:
        return Num(1.0)
    if p == 1:
        return a
    return Pow(a, float(p))


# --------------------------------------------------------------------------
# calculus


def differentiate(e: Expr) -> Expr:
    """Exact symbolic derivative with respect to ``x``, constant-folded."""
    if isinstance(e, Num):
        return Num(0.0)
    if isinstance(e, Var):
        return Num(1.0)
    if isinstance(e, Neg):
        return neg(differentiate(e.operand))
    if isinstance(e, BinOp):
        u, v = e.left, e.right
        du, dv = differentiate(u), differentiate(v)
        if e.op == "+":
            return add(du, dv)
        if e.op == "-":
            return sub(du, dv)
        if e.op == "*":
            return add(mul(du, v), mul(u, dv))
        if isinstance(v, Num):
            return div(du, v)
        return div(sub(mul(du, v), mul(u, dv)), power(v, 2))
    if isinstance(e, Pow):
        return mul(mul(Num(e.exponent), power(e.base, e.exponent - 1)), differentiate(e.base))
    if isinstance(e, Func):
        du = differentiate(e.arg)
        if e.name == "sqrt":
            return div(du, mul(Num(2.0), e))
        if e.name == "exp":
            return mul(du, e)
        if e.name == "log":
            return div(du, e.arg)
    raise TypeError(f"not an expression node: {e!r}")


def substitute(e: Expr, replacement: Expr) -> Expr:
    """Replace every occurrence of ``x`` by ``replacement``."""
    if isinstance(e, Var):
        return replacement
    if isinstance(e, Num):
        return e
    if isinstance(e, Neg):
        return Neg(substitute(e.operand, replacement))
    if isinstance(e, BinOp):
        return BinOp(e.op, substitute(e.left, replacement), substitute(e.right, replacement))
    if isinstance(e, Pow):
        return Pow(substitute(e.base, replacement), e.exponent)
    if isinstance(e, Func):
        return Func(e.name, substitute(e.arg, replacement))
    raise TypeError(f"not an expression node: {e!r}")


def fold(e: Expr) -> Expr:
    """Constant-fold a tree with the same rules the differentiator uses."""
    if isinstance(e, (Num, Var)):
        return e
    if isinstance(e, Neg):
        return neg(fold(e.operand))
    if isinstance(e, BinOp):
        a, b = fold(e.left), fold(e.right)
        return {"+": add, "-": sub, "*": mul, "/": div}[e.op](a, b)
    if isinstance(e, Pow):
        base = fold(e.base)
        if isinstance(base, Num):
            try:
                return Num(_pow(base.value, e.exponent, e))
            except DomainFault:
                return Pow(base, e.exponent)
        return power(base, e.exponent)
    if isinstance(e, Func):
        return Func(e.name, fold(e.arg))
    raise TypeError(f"not an expression node: {e!r}")


# --------------------------------------------------------------------------
# scalar evaluation


def _pow(u: float, p: float, node: Expr) -> float:
    if u < 0 and not float(p).is_integer():
        raise DomainFault("negative base with non-integer exponent", to_string(node))
    if u == 0 and p < 0:
        raise DomainFault("zero to a negative power", to_string(node))
    try:
        return math.pow(u, p)
    except OverflowError:
        raise DomainFault("overflow", to_string(node)) from None


def evaluate(e: Expr, x: float) -> float:
    """Evaluate in double precision; invalid arguments raise :class:`DomainFault`."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return float(x)
    if isinstance(e, Neg):
        return -evaluate(e.operand, x)
    if isinstance(e, BinOp):
        a, b = evaluate(e.left, x), evaluate(e.right, x)
        if e.op == "+":
            r = a + b
        elif e.op == "-":
            r = a - b
        elif e.op == "*":
            r = a * b
        else:
            if b == 0:
                raise DomainFault("division by zero", to_string(e))
            r = a / b
    elif isinstance(e, Pow):
        r = _pow(evaluate(e.base, x), e.exponent, e)
    elif isinstance(e, Func):
        a = evaluate(e.arg, x)
        if e.name == "sqrt":
            if a < 0:
                raise DomainFault("sqrt of negative argument", to_string(e))
            r = math.sqrt(a)
        elif e.name == "log":
            if a <= 0:
                raise DomainFault("log of non-positive argument", to_string(e))
            r = math.log(a)
        else:
            try:
                r = math.exp(a)
            except OverflowError:
                raise DomainFault("overflow", to_string(e)) from None
    else:
        raise TypeError(f"not an expression node: {e!r}")
    if not math.isfinite(r):
        raise DomainFault("non-finite result", to_string(e))
    return r


# --------------------------------------------------------------------------
# bytecode

OP_CONST, OP_X, OP_ADD, OP_SUB, OP_MUL, OP_DIV, OP_POW, OP_NEG, OP_SQRT, OP_EXP, OP_LOG = range(11)
_BINARY = {"+": OP_ADD, "-": OP_SUB, "*": OP_MUL, "/": OP_DIV}
_FUNC = {"sqrt": OP_SQRT, "exp": OP_EXP, "log": OP_LOG}
MAX_STACK = 64


@dataclass(frozen=True)
class Program:
    """Postfix form of an expression.

    ``ops[i]`` is an opcode and ``args[i]`` its immediate (the constant for
    OP_CONST, the exponent for OP_POW).  ``text[i]`` is the source of the
    subexpression whose value op ``i`` produces; used in fault messages.
    """

    ops: np.ndarray
    args: np.ndarray
    text: tuple[str, ...]
    stack: int
    expr: Expr = field(compare=False)

    def __len__(self) -> int:
        return len(self.ops)


def compile_expr(e: Expr) -> Program:
    ops: list[int] = []
    args: list[float] = []
    text: list[str] = []
    depth = [0, 0]

    def push(op: int, arg: float, node: Expr, delta: int):
        ops.append(op)
        args.append(arg)
        text.append(to_string(node))
        depth[0] += delta
        depth[1] = max(depth[1], depth[0])

    def emit(node: Expr):
        if isinstance(node, Num):
            push(OP_CONST, node.value, node, 1)
        elif isinstance(node, Var):
            push(OP_X, 0.0, node, 1)
        elif isinstance(node, Neg):
            emit(node.operand)
            push(OP_NEG, 0.0, node, 0)
        elif isinstance(node, BinOp):
            emit(node.left)
            emit(node.right)
            push(_BINARY[node.op], 0.0, node, -1)
        elif isinstance(node, Pow):
            emit(node.base)
            push(OP_POW, node.exponent, node, 0)
        elif isinstance(node, Func):
            emit(node.arg)
            push(_FUNC[node.name], 0.0, node, 0)
        else:
            raise TypeError(f"not an expression node: {node!r}")

    emit(e)
    if depth[1] > MAX_STACK:
        raise ParseError(f"expression nests too deeply (stack {depth[1]} > {MAX_STACK})")
    return Program(
        np.asarray(ops, dtype=np.int32),
        np.asarray(args, dtype=np.float64),
        tuple(text),
        depth[1],
        e,
    )
