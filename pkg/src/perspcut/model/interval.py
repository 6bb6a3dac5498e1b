"""Closed intervals over the extended reals and expression enclosures.

Nonlinear operations pad their result outward by ``PAD`` (relative to the
magnitude of each endpoint) instead of switching rounding modes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict

from .expr import (Const, Exp, Expr, ExpressionDomainError, Log, Neg, Pow, Product,
                   Sum, Var, topological)

INF = math.inf
PAD = 1e-12


@dataclass(frozen=True)
class Interval:
    lo: float = -INF
    hi: float = INF

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise ValueError(f"NaN interval endpoint: [{self.lo}, {self.hi}]")
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @classmethod
    def point(cls, v: float) -> "Interval":
        return cls(v, v)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    def contains(self, v: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= v <= self.hi + tol

    def intersect(self, other: "Interval") -> "Interval | None":
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        return Interval(lo, hi) if lo <= hi else None

    def hull(self, other: "Interval") -> "Interval":
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def __add__(self, other: "Interval") -> "Interval":
        return Interval(_add(self.lo, other.lo, -INF), _add(self.hi, other.hi, INF))

    def __neg__(self) -> "Interval":
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other: "Interval") -> "Interval":
        return self + (-other)

    def scale(self, k: float) -> "Interval":
        if k == 0.0:
            return Interval(0.0, 0.0)
        a, b = _mul(k, self.lo), _mul(k, self.hi)
        return Interval(min(a, b), max(a, b))

    def __mul__(self, other: "Interval") -> "Interval":
        cands = [_mul(a, b) for a in (self.lo, self.hi) for b in (other.lo, other.hi)]
        return _pad(min(cands), max(cands))

    def __pow__(self, n: int) -> "Interval":
        lo, hi = self.lo, self.hi
        if n % 2 == 1:
            return _pad(_ipow(lo, n), _ipow(hi, n))
        if lo >= 0.0:
            return _pad(_ipow(lo, n), _ipow(hi, n))
        if hi <= 0.0:
            return _pad(_ipow(hi, n), _ipow(lo, n))
        return _pad(0.0, max(_ipow(lo, n), _ipow(hi, n)), clamp_lo=0.0)

    def exp(self) -> "Interval":
        return _pad(_exp(self.lo), _exp(self.hi), clamp_lo=0.0)

    def log(self) -> "Interval":
        if self.hi <= 0.0:
            raise ExpressionDomainError(f"log of non-positive interval {self}")
        lo = math.log(self.lo) if self.lo > 0.0 else -INF
        hi = math.log(self.hi) if math.isfinite(self.hi) else INF
        return _pad(lo, hi)

    def __repr__(self) -> str:
        return f"[{self.lo}, {self.hi}]"


def _add(a: float, b: float, inf_default: float) -> float:
    s = a + b
    return inf_default if math.isnan(s) else s


def _mul(a: float, b: float) -> float:
    if a == 0.0 or b == 0.0:
        return 0.0
    return a * b


def _ipow(a: float, n: int) -> float:
    try:
        return a ** n
    except OverflowError:
        return math.copysign(INF, a) if n % 2 else INF


def _exp(a: float) -> float:
    if a > 700.0:
        return INF
    return math.exp(a)


def _pad(lo: float, hi: float, clamp_lo: float = -INF) -> Interval:
    if math.isfinite(lo):
        lo = max(lo - PAD * max(1.0, abs(lo)), clamp_lo)
    if math.isfinite(hi):
        hi = hi + PAD * max(1.0, abs(hi))
    return Interval(lo, hi)


def as_interval(b) -> Interval:
    if isinstance(b, Interval):
        return b
    lo, hi = b
    return Interval(float(lo), float(hi))


def interval_eval(e: Expr, box) -> Interval:
    """Enclosure of ``{eval(e, p) : p in box}``; ``box[i]`` is an Interval or (lo, hi)."""
    val: Dict[int, Interval] = {}
    for node in topological(e):
        if isinstance(node, Var):
            r = as_interval(box[node.id])
        elif isinstance(node, Const):
            r = Interval(node.value, node.value)
        elif isinstance(node, Sum):
            r = Interval(node.constant, node.constant)
            for k, ch in zip(node.coeffs, node.children):
                r = r + val[id(ch)].scale(k)
        elif isinstance(node, Product):
            r = val[id(node.children[0])]
            for ch in node.children[1:]:
                r = r * val[id(ch)]
        elif isinstance(node, Pow):
            r = val[id(node.child)] ** node.exponent
        elif isinstance(node, Exp):
            r = val[id(node.child)].exp()
        elif isinstance(node, Log):
            r = val[id(node.child)].log()
        elif isinstance(node, Neg):
            r = -val[id(node.child)]
        else:
            raise TypeError(f"unknown node {node!r}")
        val[id(node)] = r
    return val[id(e)]
