"""A small arithmetic expression language for config-defined functions.

Grammar (``^`` binds tightest and is right-associative, then unary minus,
then ``* /``, then ``+ -``)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := atom ('^' unary)?
    atom    := NUMBER | 'i' | 't' | 'x' | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Builtins: exp, log, sin, cos, sqrt, abs (one argument), min, max (two), and
``step(x, r)`` which is 1 where ``x > r`` and 0 elsewhere.  ``i`` is the
imaginary unit.

Evaluation works over floats, complex numbers, numpy arrays and
:class:`~fklattice.autodiff.HyperDual` values.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import autodiff
from .autodiff import DomainError, HyperDual

VARIABLES = ("t", "x")
FUNCTIONS = {
    "exp": 1, "log": 1, "sin": 1, "cos": 1, "sqrt": 1, "abs": 1,
    "min": 2, "max": 2, "step": 2,
}


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, offset: int, expected: str, src: str = ""):
        self.offset = offset
        self.expected = expected
        super().__init__(f"syntax error at offset {offset}: expected {expected}"
                         + (f" in {src!r}" if src else ""))


class UnknownIdentifier(ExprError):
    def __init__(self, name: str, offset: int):
        self.name = name
        self.offset = offset
        super().__init__(f"unknown identifier {name!r} at offset {offset}")


class UnboundVariable(ExprError):
    pass


# AST

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Imag:
    pass


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
    name: str
    args: tuple


Expr = Union[Num, Imag, Var, Neg, BinOp, Call]


# tokenizer

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
""", re.VERBOSE)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    offset: int


def _tokenize(src: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ExprSyntaxError(_byte_offset(src, pos), "a number, name or operator", src)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), _byte_offset(src, pos)))
        pos = m.end()
    toks.append(_Tok("end", "", _byte_offset(src, len(src))))
    return toks


def _byte_offset(src: str, pos: int) -> int:
    return len(src[:pos].encode("utf-8"))


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.toks = _tokenize(src)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> None:
        if self.tok.text != text or self.tok.kind == "end":
            raise ExprSyntaxError(self.tok.offset, repr(text), self.src)
        self.advance()

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "end":
            raise ExprSyntaxError(self.tok.offset, "an operator or end of input", self.src)
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            left = BinOp(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            left = BinOp(op, left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Neg(self.unary())
        if self.tok.kind == "op" and self.tok.text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "name":
            self.advance()
            if tok.text == "i":
                return Imag()
            if tok.text in VARIABLES:
                return Var(tok.text)
            if tok.text in FUNCTIONS:
                return self.call(tok)
            raise UnknownIdentifier(tok.text, tok.offset)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        raise ExprSyntaxError(tok.offset, "a number, variable, function call or '('", self.src)

    def call(self, name_tok: _Tok) -> Expr:
        self.expect("(")
        args = [self.expr()]
        while self.tok.kind == "op" and self.tok.text == ",":
            self.advance()
            args.append(self.expr())
        self.expect(")")
        arity = FUNCTIONS[name_tok.text]
        if len(args) != arity:
            raise ExprSyntaxError(name_tok.offset, f"{arity} argument(s) to {name_tok.text}", self.src)
        return Call(name_tok.text, tuple(args))


def parse(src: str) -> Expr:
    """Parse ``src`` into an AST; raises :class:`ExprSyntaxError` or :class:`UnknownIdentifier`."""
    if not isinstance(src, str):
        raise ExprError(f"expression must be a string, got {type(src).__name__}")
    return _Parser(src).parse()


# pretty printing

_LEVEL_ADD, _LEVEL_MUL, _LEVEL_NEG, _LEVEL_POW, _LEVEL_ATOM = 1, 2, 3, 4, 5


def _level(e: Expr) -> int:
    if isinstance(e, BinOp):
        return {"+": _LEVEL_ADD, "-": _LEVEL_ADD, "*": _LEVEL_MUL, "/": _LEVEL_MUL, "^": _LEVEL_POW}[e.op]
    if isinstance(e, Neg):
        return _LEVEL_NEG
    if isinstance(e, Num) and e.value < 0:
        return _LEVEL_NEG
    return _LEVEL_ATOM


def _wrap(e: Expr, min_level: int) -> str:
    s = to_source(e)
    return f"({s})" if _level(e) < min_level else s


def to_source(e: Expr) -> str:
    """Render an AST with the minimum parentheses needed to re-parse it identically."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Imag):
        return "i"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return "-" + _wrap(e.operand, _LEVEL_NEG)
    if isinstance(e, Call):
        return f"{e.name}({', '.join(to_source(a) for a in e.args)})"
    if e.op in "+-":
        return f"{_wrap(e.left, _LEVEL_ADD)} {e.op} {_wrap(e.right, _LEVEL_MUL)}"
    if e.op in "*/":
        return f"{_wrap(e.left, _LEVEL_MUL)}{e.op}{_wrap(e.right, _LEVEL_NEG)}"
    return f"{_wrap(e.left, _LEVEL_ATOM)}^{_wrap(e.right, _LEVEL_NEG)}"


def variables(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Neg):
        return variables(e.operand)
    if isinstance(e, BinOp):
        return variables(e.left) | variables(e.right)
    if isinstance(e, Call):
        return set().union(*(variables(a) for a in e.args))
    return set()


def is_complex(e: Expr) -> bool:
    """True if the imaginary unit appears anywhere in ``e``."""
    if isinstance(e, Imag):
        return True
    if isinstance(e, Neg):
        return is_complex(e.operand)
    if isinstance(e, BinOp):
        return is_complex(e.left) or is_complex(e.right)
    if isinstance(e, Call):
        return any(is_complex(a) for a in e.args)
    return False


# evaluation

def _real_part(v):
    return v.value.real if isinstance(v, HyperDual) else np.real(v)


def _apply(name: str, args: list):
    if any(isinstance(a, HyperDual) for a in args):
        if name in ("min", "max"):
            a, b = args
            va, vb = _real_part(a), _real_part(b)
            return autodiff.select(va <= vb if name == "min" else va >= vb, a, b)
        if name == "step":
            x, r = args
            return HyperDual.constant(np.where(_real_part(x) > _real_part(r), 1.0, 0.0))
        return autodiff.lift_unary(name, args[0])

    if name == "step":
        x, r = args
        out = np.where(np.real(x) > np.real(r), 1.0, 0.0)
        return out if out.ndim else float(out)
    if name == "min":
        return np.minimum(np.real(args[0]), np.real(args[1]))
    if name == "max":
        return np.maximum(np.real(args[0]), np.real(args[1]))
    (a,) = args
    real_arg = not np.iscomplexobj(a)
    if name == "log" and real_arg and np.any(np.asarray(a) <= 0):
        raise DomainError("log of nonpositive value")
    if name == "sqrt" and real_arg and np.any(np.asarray(a) < 0):
        raise DomainError("sqrt of negative value")
    return {"exp": np.exp, "log": np.log, "sin": np.sin, "cos": np.cos,
            "sqrt": np.sqrt, "abs": np.abs}[name](a)


def _pow(a, b):
    if isinstance(a, HyperDual) or isinstance(b, HyperDual):
        return a ** b
    if not np.iscomplexobj(a) and not np.iscomplexobj(b):
        b_arr = np.asarray(b)
        if np.any(np.asarray(a) < 0) and np.any(b_arr != np.round(b_arr)):
            raise DomainError("non-integer power of negative value")
        if np.any(np.asarray(a) == 0) and np.any(b_arr < 0):
            raise DomainError("negative power of zero")
        return np.power(np.asarray(a, dtype=float), b) if np.ndim(a) or np.ndim(b) else float(a) ** float(b)
    return np.power(a, b)


def evaluate(e: Expr, bindings: dict):
    """Evaluate ``e`` with variable values from ``bindings``.

    Binding values may be floats, complex numbers, numpy arrays or HyperDual
    numbers; the result has the corresponding kind.
    """
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Imag):
        return 1j
    if isinstance(e, Var):
        try:
            return bindings[e.name]
        except KeyError:
            raise UnboundVariable(f"variable {e.name!r} is not bound") from None
    if isinstance(e, Neg):
        return -evaluate(e.operand, bindings)
    if isinstance(e, Call):
        return _apply(e.name, [evaluate(a, bindings) for a in e.args])
    a = evaluate(e.left, bindings)
    b = evaluate(e.right, bindings)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if e.op == "/":
        if not isinstance(b, HyperDual) and np.any(np.asarray(b) == 0):
            raise DomainError("division by zero")
        return a / b
    return _pow(a, b)


def constant_value(e: Expr):
    """Value of a variable-free expression, or None if ``e`` depends on t or x."""
    if variables(e):
        return None
    return evaluate(e, {})


def match_step(e: Expr):
    """Recognize ``k*step(x, r)``, ``step(x, r)*k`` or ``step(x, r)``.

    Returns ``(kappa, r)`` with real constants, or None when ``e`` has another
    shape.  Used to route a potential to the sojourn-time correction.
    """
    def step_level(node):
        if isinstance(node, Call) and node.name == "step" and node.args[0] == Var("x"):
            r = constant_value(node.args[1])
            if r is not None and not is_complex(node.args[1]):
                return float(np.real(r))
        return None

    r = step_level(e)
    if r is not None:
        return 1.0, r
    if isinstance(e, BinOp) and e.op == "*":
        for coef, other in ((e.left, e.right), (e.right, e.left)):
            r = step_level(other)
            k = constant_value(coef)
            if r is not None and k is not None and not is_complex(coef):
                return float(np.real(k)), r
    return None


class Function:
    """A parsed expression bound to a fixed set of argument names.

    ``Function("4 - t^2", ("t",))(0.5)`` evaluates to 3.75.  With
    ``real=True`` results with imaginary part above 1e-14 are rejected.
    """

    def __init__(self, src, args: tuple, real: bool = True):
        self.expr = parse(src) if isinstance(src, str) else src
        self.args = tuple(args)
        self.real = real
        extra = variables(self.expr) - set(self.args)
        if extra:
            raise UnboundVariable(
                f"{to_source(self.expr)!r} uses {sorted(extra)} but only {list(self.args)} are allowed")

    def __call__(self, *values):
        out = evaluate(self.expr, dict(zip(self.args, values)))
        if isinstance(out, HyperDual):
            return out
        if self.real:
            if np.iscomplexobj(out):
                if np.any(np.abs(np.imag(out)) > 1e-14):
                    raise ExprError(f"{to_source(self.expr)!r} produced a complex value")
                out = np.real(out)
        return out

    def __repr__(self) -> str:
        return f"Function({to_source(self.expr)!r}, {self.args})"
