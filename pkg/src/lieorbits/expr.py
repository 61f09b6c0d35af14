"""Scalar coefficient expressions: parsing, evaluation, symbolic differentiation.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | base ('^' ['-'] integer)?
    base   := number | 'x' integer | func '(' args ')' | '(' expr ')'
    func   := sin | cos | exp | log | sqrt | abs | ifeq0

``ifeq0(u, a, b)`` evaluates to ``a`` when ``u`` is exactly zero and to ``b``
otherwise; only the selected branch is evaluated.  Named definitions
(``def name = expr``) are inlined at parse time.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import mpmath

__all__ = [
    "Expression",
    "Const",
    "Var",
    "Unary",
    "Binary",
    "Guard",
    "ParseDiagnostic",
    "DomainError",
    "parse",
    "evaluate",
    "differentiate",
    "to_text",
    "compile_vector",
    "count_nodes",
    "ZERO",
    "ONE",
]

UNARY_FUNCS = ("sin", "cos", "exp", "log", "sqrt", "abs")


class Expression:
    """Base class of the immutable expression AST."""

    __slots__ = ()

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True, eq=True)
class Const(Expression):
    value: float


@dataclass(frozen=True, eq=True)
class Var(Expression):
    index: int  # 1-based, x1..xn


@dataclass(frozen=True, eq=True)
class Unary(Expression):
    op: str  # 'neg' or one of UNARY_FUNCS
    arg: Expression


@dataclass(frozen=True, eq=True)
class Binary(Expression):
    op: str  # '+', '-', '*', '/', '^' (right operand an integer Const for '^')
    left: Expression
    right: Expression


@dataclass(frozen=True, eq=True)
class Guard(Expression):
    test: Expression
    then: Expression
    other: Expression


ZERO = Const(0.0)
ONE = Const(1.0)


class ParseDiagnostic(ValueError):
    """Syntax or validation error at a byte offset of the source text."""

    def __init__(self, offset: int, message: str, text: str = ""):
        self.offset = offset
        self.message = message
        self.text = text
        super().__init__(f"offset {offset}: {message}")


class DomainError(ArithmeticError):
    """Evaluation left the domain of a node (division by zero, log of x <= 0, ...)."""

    def __init__(self, message: str, node: Expression | None = None):
        self.node = node
        where = f" in {to_text(node)!r}" if node is not None else ""
        super().__init__(message + where)


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),])"
    r")"
)


@dataclass
class _Tok:
    kind: str
    text: str
    offset: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            bad = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ParseDiagnostic(bad, f"unexpected character {text[bad]!r}", text)
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    toks.append(_Tok("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str, n: int, defs: Mapping[str, Expression]):
        self.text = text
        self.n = n
        self.defs = defs
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def error(self, tok: _Tok, message: str) -> ParseDiagnostic:
        offset = min(tok.offset, max(len(self.text) - 1, 0))
        return ParseDiagnostic(offset, message, self.text)

    def expect(self, text: str) -> _Tok:
        tok = self.take()
        if tok.text != text:
            raise self.error(tok, f"expected {text!r}, found {tok.text or 'end of input'!r}")
        return tok

    def parse(self) -> Expression:
        e = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise self.error(tok, f"unexpected {tok.text!r}")
        return e

    def expr(self) -> Expression:
        left = self.term()
        while self.peek().text in ("+", "-"):
            op = self.take().text
            left = Binary(op, left, self.term())
        return left

    def term(self) -> Expression:
        left = self.factor()
        while self.peek().text in ("*", "/"):
            op = self.take().text
            left = Binary(op, left, self.factor())
        return left

    def factor(self) -> Expression:
        if self.peek().text == "-":
            self.take()
            return Unary("neg", self.factor())
        base = self.base()
        if self.peek().text == "^":
            self.take()
            neg = False
            if self.peek().text == "-":
                self.take()
                neg = True
            tok = self.take()
            if tok.kind != "num" or not re.fullmatch(r"\d+", tok.text):
                raise self.error(tok, "exponent must be an integer literal")
            k = int(tok.text)
            return Binary("^", base, Const(float(-k if neg else k)))
        return base

    def base(self) -> Expression:
        tok = self.take()
        if tok.kind == "num":
            return Const(float(tok.text))
        if tok.text == "(":
            e = self.expr()
            self.expect(")")
            return e
        if tok.kind == "name":
            name = tok.text
            if self.peek().text == "(":
                return self.call(tok)
            m = re.fullmatch(r"x(\d+)", name)
            if m:
                k = int(m.group(1))
                if not 1 <= k <= self.n:
                    raise self.error(tok, f"variable {name} out of range x1..x{self.n}")
                return Var(k)
            if name in self.defs:
                return self.defs[name]
            raise self.error(tok, f"unknown name {name!r}")
        raise self.error(tok, f"unexpected {tok.text or 'end of input'!r}")

    def call(self, name_tok: _Tok) -> Expression:
        name = name_tok.text
        self.expect("(")
        args = [self.expr()]
        while self.peek().text == ",":
            self.take()
            args.append(self.expr())
        self.expect(")")
        if name in UNARY_FUNCS:
            if len(args) != 1:
                raise self.error(name_tok, f"{name} takes one argument")
            return Unary(name, args[0])
        if name == "ifeq0":
            if len(args) != 3:
                raise self.error(name_tok, "ifeq0 takes three arguments")
            return Guard(*args)
        raise self.error(name_tok, f"unknown function {name!r}")


def parse(text: str, n: int, defs: Mapping[str, Expression] | None = None) -> Expression:
    """Parse ``text`` over variables ``x1..xn``; ``defs`` maps names to inlined ASTs."""
    if not text.strip():
        raise ParseDiagnostic(0, "empty expression", text)
    return _Parser(text, n, defs or {}).parse()


# ---------------------------------------------------------------- printing

def to_text(e: Expression) -> str:
    """Fully parenthesised source text; ``parse(to_text(e))`` rebuilds ``e`` for parsed ASTs."""
    if isinstance(e, Const):
        v = e.value
        if v < 0 or (v == 0 and math.copysign(1.0, v) < 0):
            return f"(-{repr(-v)})"
        return repr(v)
    if isinstance(e, Var):
        return f"x{e.index}"
    if isinstance(e, Unary):
        if e.op == "neg":
            return f"(-{to_text(e.arg)})"
        return f"{e.op}({to_text(e.arg)})"
    if isinstance(e, Binary):
        if e.op == "^":
            k = int(e.right.value)
            return f"({to_text(e.left)}^{k})"
        return f"({to_text(e.left)} {e.op} {to_text(e.right)})"
    if isinstance(e, Guard):
        return f"ifeq0({to_text(e.test)}, {to_text(e.then)}, {to_text(e.other)})"
    raise TypeError(f"not an expression: {e!r}")


def count_nodes(e: Expression) -> dict[str, int]:
    """Node counts by kind: const, var, unary, binary, guard."""
    counts = {"const": 0, "var": 0, "unary": 0, "binary": 0, "guard": 0}
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Const):
            counts["const"] += 1
        elif isinstance(node, Var):
            counts["var"] += 1
        elif isinstance(node, Unary):
            counts["unary"] += 1
            stack.append(node.arg)
        elif isinstance(node, Binary):
            counts["binary"] += 1
            # the integer exponent of '^' is part of the node, not an operand
            stack.extend([node.left] if node.op == "^" else [node.left, node.right])
        elif isinstance(node, Guard):
            counts["guard"] += 1
            stack.extend([node.test, node.then, node.other])
    return counts


# ---------------------------------------------------------------- evaluation

def _apply_unary(op: str, v: float, node: Expression) -> float:
    if op == "neg":
        return -v
    if op == "log" and v <= 0:
        raise DomainError(f"log of non-positive value {v!r}", node)
    if op == "sqrt" and v < 0:
        raise DomainError(f"sqrt of negative value {v!r}", node)
    try:
        return {"sin": math.sin, "cos": math.cos, "exp": math.exp,
                "log": math.log, "sqrt": math.sqrt, "abs": abs}[op](v)
    except (OverflowError, ValueError) as exc:
        raise DomainError(f"{op}({v!r}): {exc}", node) from None


def evaluate(e: Expression, x: Sequence[float]) -> float:
    """Reference tree-walk evaluation at the point ``x`` (0-based sequence)."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return float(x[e.index - 1])
    if isinstance(e, Unary):
        out = _apply_unary(e.op, evaluate(e.arg, x), e)
    elif isinstance(e, Binary):
        a = evaluate(e.left, x)
        if e.op == "^":
            k = int(e.right.value)
            if a == 0 and k < 0:
                raise DomainError("zero raised to a negative power", e)
            try:
                out = a ** k
            except OverflowError:
                raise DomainError("overflow in power", e) from None
        else:
            b = evaluate(e.right, x)
            if e.op == "+":
                out = a + b
            elif e.op == "-":
                out = a - b
            elif e.op == "*":
                out = a * b
            else:
                if b == 0:
                    raise DomainError("division by zero", e)
                out = a / b
    elif isinstance(e, Guard):
        return evaluate(e.then, x) if evaluate(e.test, x) == 0 else evaluate(e.other, x)
    else:
        raise TypeError(f"not an expression: {e!r}")
    if not math.isfinite(out):
        raise DomainError("non-finite result", e)
    return out


def _py_source(e: Expression, fn: str) -> str:
    # fn: module prefix for the transcendental functions ('m' or 'mp')
    if isinstance(e, Const):
        return repr(e.value) if fn == "m" else f"_c({repr(e.value)})"
    if isinstance(e, Var):
        return f"x[{e.index - 1}]"
    if isinstance(e, Unary):
        inner = _py_source(e.arg, fn)
        if e.op == "neg":
            return f"(-{inner})"
        if e.op == "abs":
            return f"abs({inner})"
        if e.op in ("log", "sqrt"):
            return f"_{e.op}({inner})"
        return f"{fn}.{e.op}({inner})"
    if isinstance(e, Binary):
        left = _py_source(e.left, fn)
        if e.op == "^":
            return f"({left}**{int(e.right.value)})"
        right = _py_source(e.right, fn)
        return f"({left} {e.op} {right})"
    if isinstance(e, Guard):
        return (f"({_py_source(e.then, fn)} if {_py_source(e.test, fn)} == 0 "
                f"else {_py_source(e.other, fn)})")
    raise TypeError(f"not an expression: {e!r}")


def _strict_log(mod):
    def log(v):
        if v <= 0:
            raise ValueError("log of non-positive value")
        return mod.log(v)
    return log


def _strict_sqrt(mod):
    def sqrt(v):
        if v < 0:
            raise ValueError("sqrt of negative value")
        return mod.sqrt(v)
    return sqrt


def compile_vector(exprs: Sequence[Expression], backend: str = "float") -> Callable:
    """Compile expressions into ``f(x) -> tuple`` evaluated in one call.

    ``backend="float"`` uses ``math``; ``backend="mp"`` uses ``mpmath`` numbers,
    whose unbounded exponent range survives values like ``exp(-1/x^2)`` near 0.
    Domain failures are re-diagnosed by :func:`evaluate` to name the node.
    """
    fn = "m" if backend == "float" else "mp"
    body = ", ".join(_py_source(e, fn) for e in exprs)
    src = f"lambda x: ({body},)"
    mod = math if backend == "float" else mpmath
    env = {"m": math, "mp": mpmath, "_c": mpmath.mpf,
           "_log": _strict_log(mod), "_sqrt": _strict_sqrt(mod)}
    raw = eval(src, env)  # noqa: S307 - source generated from a validated AST
    isfinite = math.isfinite if backend == "float" else mpmath.isfinite
    exprs = tuple(exprs)

    def diagnose(x):
        xs = [float(v) for v in x]
        for e in exprs:
            evaluate(e, xs)
        raise DomainError("evaluation failed")

    def f(x):
        try:
            out = raw(x)
        except (ZeroDivisionError, ValueError, OverflowError):
            diagnose(x)
        for v in out:
            if not isfinite(v):
                diagnose(x)
        return out

    return f


# ---------------------------------------------------------------- differentiation
# Smart constructors fold constants; this is the only simplification performed.

def _is_const(e: Expression, v: float | None = None) -> bool:
    return isinstance(e, Const) and (v is None or e.value == v)


def add(a: Expression, b: Expression) -> Expression:
    if _is_const(a, 0):
        return b
    if _is_const(b, 0):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    return Binary("+", a, b)


def sub(a: Expression, b: Expression) -> Expression:
    if _is_const(b, 0):
        return a
    if a == b:
        return ZERO
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    if _is_const(a, 0):
        return neg(b)
    return Binary("-", a, b)


def neg(a: Expression) -> Expression:
    if _is_const(a):
        return Const(-a.value) if a.value != 0 else ZERO
    if isinstance(a, Unary) and a.op == "neg":
        return a.arg
    return Unary("neg", a)


def mul(a: Expression, b: Expression) -> Expression:
    if _is_const(a, 0) or _is_const(b, 0):
        return ZERO
    if _is_const(a, 1):
        return b
    if _is_const(b, 1):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    if _is_const(a, -1):
        return neg(b)
    if _is_const(b, -1):
        return neg(a)
    return Binary("*", a, b)


def div(a: Expression, b: Expression) -> Expression:
    if _is_const(b, 1):
        return a
    if _is_const(a, 0):
        return ZERO
    return Binary("/", a, b)


def power(a: Expression, k: int) -> Expression:
    if k == 0:
        return ONE
    if k == 1:
        return a
    return Binary("^", a, Const(float(k)))


def guard(test: Expression, then: Expression, other: Expression) -> Expression:
    if then == other:
        return then
    return Guard(test, then, other)


def differentiate(e: Expression, k: int) -> Expression:
    """Symbolic partial derivative with respect to ``x_k`` (1-based)."""
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.index == k else ZERO
    if isinstance(e, Guard):
        return guard(e.test, differentiate(e.then, k), differentiate(e.other, k))
    if isinstance(e, Unary):
        u = e.arg
        du = differentiate(u, k)
        if _is_const(du, 0):
            return ZERO
        op = e.op
        if op == "neg":
            return neg(du)
        if op == "sin":
            return mul(Unary("cos", u), du)
        if op == "cos":
            return neg(mul(Unary("sin", u), du))
        if op == "exp":
            return mul(e, du)
        if op == "log":
            return div(du, u)
        if op == "sqrt":
            return div(du, mul(Const(2.0), e))
        if op == "abs":
            # sign(u) written with a guard so the derivative stays total
            return mul(guard(u, ZERO, div(u, e)), du)
        raise ValueError(op)
    if isinstance(e, Binary):
        a, b = e.left, e.right
        da = differentiate(a, k)
        if e.op == "^":
            n = int(b.value)
            if n == 0 or _is_const(da, 0):
                return ZERO
            return mul(mul(Const(float(n)), power(a, n - 1)), da)
        db = differentiate(b, k)
        if e.op == "+":
            return add(da, db)
        if e.op == "-":
            return sub(da, db)
        if e.op == "*":
            return add(mul(da, b), mul(a, db))
        if e.op == "/":
            if _is_const(db, 0):
                return div(da, b)
            return div(sub(mul(da, b), mul(a, db)), power(b, 2))
        raise ValueError(e.op)
    raise TypeError(f"not an expression: {e!r}")
