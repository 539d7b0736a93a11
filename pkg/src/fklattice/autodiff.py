"""Hyper-dual numbers for exact first and second derivatives of drift functions.

A hyper-dual number ``a + b e1 + c e2 + d e1e2`` with ``e1**2 = e2**2 = 0``
carries a value, two first-order directional derivatives and the mixed second
derivative through ordinary arithmetic.  Components may be floats or numpy
arrays, so one evaluation differentiates a drift at every lattice node.
"""

from __future__ import annotations

from typing import Callable

import numpy as np


class DomainError(ValueError):
    """An elementary function was applied outside its domain."""


class HyperDual:
    __slots__ = ("value", "d1", "d2", "d12")
    # keep numpy from broadcasting over HyperDual objects; reflected ops take over
    __array_ufunc__ = None

    def __init__(self, value, d1=0.0, d2=0.0, d12=0.0):
        self.value = value
        self.d1 = d1
        self.d2 = d2
        self.d12 = d12

    @classmethod
    def constant(cls, value) -> "HyperDual":
        return cls(value, 0.0, 0.0, 0.0)

    @classmethod
    def seed(cls, value, d1=1.0, d2=1.0) -> "HyperDual":
        """Independent variable; with d1 = d2 = 1 the result holds f' in d1 and f'' in d12."""
        return cls(value, d1, d2, 0.0)

    def __repr__(self) -> str:
        return f"HyperDual({self.value!r}, {self.d1!r}, {self.d2!r}, {self.d12!r})"

    def parts(self) -> tuple:
        return self.value, self.d1, self.d2, self.d12

    # arithmetic

    def __add__(self, other):
        if isinstance(other, HyperDual):
            return HyperDual(self.value + other.value, self.d1 + other.d1,
                             self.d2 + other.d2, self.d12 + other.d12)
        return HyperDual(self.value + other, self.d1, self.d2, self.d12)

    __radd__ = __add__

    def __neg__(self):
        return HyperDual(-self.value, -self.d1, -self.d2, -self.d12)

    def __pos__(self):
        return self

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, HyperDual):
            return HyperDual(
                self.value * other.value,
                self.value * other.d1 + self.d1 * other.value,
                self.value * other.d2 + self.d2 * other.value,
                self.value * other.d12 + self.d1 * other.d2
                + self.d2 * other.d1 + self.d12 * other.value,
            )
        return HyperDual(self.value * other, self.d1 * other, self.d2 * other, self.d12 * other)

    __rmul__ = __mul__

    def reciprocal(self) -> "HyperDual":
        if np.any(np.asarray(self.value) == 0):
            raise DomainError("division by zero")
        return _chain(self, 1.0 / self.value, -1.0 / self.value**2, 2.0 / self.value**3)

    def __truediv__(self, other):
        if isinstance(other, HyperDual):
            return self * other.reciprocal()
        return self * (1.0 / other)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, other):
        if isinstance(other, HyperDual):
            if _is_constant(other):
                return power(self, other.value)
            return exp(other * log(self))
        return power(self, other)

    def __rpow__(self, other):
        # constant ** hyperdual
        return exp(self * np.log(other))


def _is_constant(a: HyperDual) -> bool:
    return not (np.any(a.d1) or np.any(a.d2) or np.any(a.d12))


def _chain(a: HyperDual, f0, f1, f2) -> HyperDual:
    """Push a through a scalar function with value f0 and derivatives f1, f2 at a.value."""
    return HyperDual(f0, f1 * a.d1, f1 * a.d2, f1 * a.d12 + f2 * a.d1 * a.d2)


def exp(a: HyperDual) -> HyperDual:
    e = np.exp(a.value)
    return _chain(a, e, e, e)


def log(a: HyperDual) -> HyperDual:
    v = a.value
    if np.any(np.real(v) <= 0):
        raise DomainError("log of nonpositive value")
    return _chain(a, np.log(v), 1.0 / v, -1.0 / v**2)


def sin(a: HyperDual) -> HyperDual:
    s, c = np.sin(a.value), np.cos(a.value)
    return _chain(a, s, c, -s)


def cos(a: HyperDual) -> HyperDual:
    s, c = np.sin(a.value), np.cos(a.value)
    return _chain(a, c, -s, -c)


def sqrt(a: HyperDual) -> HyperDual:
    v = a.value
    if np.any(np.real(v) <= 0):
        raise DomainError("sqrt derivative undefined at nonpositive value")
    r = np.sqrt(v)
    return _chain(a, r, 0.5 / r, -0.25 / (r * v))


def absolute(a: HyperDual) -> HyperDual:
    sign = np.sign(a.value)
    return HyperDual(np.abs(a.value), sign * a.d1, sign * a.d2, sign * a.d12)


def power(a: HyperDual, p) -> HyperDual:
    v = a.value
    p = float(p)
    if p == 0.0:
        return HyperDual.constant(np.ones_like(v) if np.ndim(v) else 1.0)
    integral = p.is_integer()
    if not integral and np.any(np.real(v) <= 0):
        raise DomainError("non-integer power of nonpositive value")
    if integral and p < 0 and np.any(np.asarray(v) == 0):
        raise DomainError("negative power of zero")
    if integral and p > 0:
        # v**(p-1) etc. stay finite at v = 0 for nonnegative integer exponents
        f1 = p * v ** (p - 1) if p >= 1 else 0.0
        f2 = p * (p - 1) * v ** (p - 2) if p >= 2 else 0.0
    else:
        f1 = p * v ** (p - 1)
        f2 = p * (p - 1) * v ** (p - 2)
    return _chain(a, v**p, f1, f2)


def select(cond, a, b):
    """Componentwise ``a if cond else b`` for mixed HyperDual / plain operands."""
    a = a if isinstance(a, HyperDual) else HyperDual.constant(a)
    b = b if isinstance(b, HyperDual) else HyperDual.constant(b)
    return HyperDual(*(np.where(cond, pa, pb) for pa, pb in zip(a.parts(), b.parts())))


_UNARY = {
    "exp": exp,
    "log": log,
    "sin": sin,
    "cos": cos,
    "sqrt": sqrt,
    "abs": absolute,
}


def lift_unary(name: str, x: HyperDual, p: float | None = None) -> HyperDual:
    """Apply the elementary function ``name`` to ``x`` through all four slots.

    ``name`` is one of exp, log, sin, cos, sqrt, abs or ``pow`` (with constant
    exponent ``p``).  Raises :class:`DomainError` outside the function's domain.
    """
    if not isinstance(x, HyperDual):
        x = HyperDual.constant(x)
    if name == "pow":
        if p is None:
            raise ValueError("pow requires a constant exponent")
        return power(x, p)
    try:
        fn = _UNARY[name]
    except KeyError:
        raise ValueError(f"unsupported function {name!r}") from None
    return fn(x)


def drift_partials(drift, t, x):
    """Return ``(mu, dmu/dt, dmu/dx, d2mu/dx2)`` of a drift at ``(t, x)``.

    ``drift`` is either a parsed expression over ``t`` and ``x`` or a callable
    ``f(t, x)`` written with ordinary arithmetic (so it accepts HyperDual
    arguments).  Two evaluations are made: one seeded in ``t`` and one seeded
    doubly in ``x``.  ``x`` may be an array.
    """
    f = _as_callable(drift)
    x = np.asarray(x, dtype=float)
    shape = x.shape

    dt = f(HyperDual(t, 1.0, 0.0, 0.0), HyperDual.constant(x))
    dx = f(HyperDual.constant(t), HyperDual.seed(x))
    dt = dt if isinstance(dt, HyperDual) else HyperDual.constant(dt)
    dx = dx if isinstance(dx, HyperDual) else HyperDual.constant(dx)

    def out(v):
        a = np.asarray(v)
        if np.iscomplexobj(a):
            if np.any(np.abs(a.imag) > 1e-14):
                raise ValueError("drift must be real-valued")
            a = a.real
        return np.broadcast_to(a.astype(float), shape).copy()

    return out(dx.value), out(dt.d1), out(dx.d1), out(dx.d12)


def _as_callable(drift) -> Callable:
    if callable(drift):
        return drift
    from .expr import evaluate

    return lambda t, x: evaluate(drift, {"t": t, "x": x})
