"""Syntactic curvature tagging by composition rules.

The tag is sound, not complete: ``UNKNOWN`` is returned whenever no rule
applies. Interval enclosures of children decide the sign conditions
(odd powers, monotonicity of even powers, positivity under ``log``).
"""

from __future__ import annotations

import enum
from typing import Dict

from .expr import (Const, Exp, Expr, ExpressionDomainError, Log, Neg, Pow, Product,
                   Sum, Var, topological)
from .interval import Interval, interval_eval


class Curvature(str, enum.Enum):
    LINEAR = "linear"
    CONVEX = "convex"
    CONCAVE = "concave"
    UNKNOWN = "unknown"

    def negate(self) -> "Curvature":
        return {Curvature.CONVEX: Curvature.CONCAVE,
                Curvature.CONCAVE: Curvature.CONVEX}.get(self, self)

    def scale(self, k: float) -> "Curvature":
        if k == 0.0:
            return Curvature.LINEAR
        return self if k > 0 else self.negate()

    @property
    def is_convex(self) -> bool:
        return self in (Curvature.LINEAR, Curvature.CONVEX)

    @property
    def is_concave(self) -> bool:
        return self in (Curvature.LINEAR, Curvature.CONCAVE)


def _combine(a: Curvature, b: Curvature) -> Curvature:
    if a is Curvature.LINEAR:
        return b
    if b is Curvature.LINEAR:
        return a
    if a is b:
        return a
    return Curvature.UNKNOWN


def _compose(outer_convex: bool, outer_concave: bool, increasing: bool,
             decreasing: bool, inner: Curvature) -> Curvature:
    """Curvature of g(h) from properties of g on the range of h."""
    if inner is Curvature.LINEAR:
        if outer_convex and outer_concave:
            return Curvature.LINEAR
        if outer_convex:
            return Curvature.CONVEX
        if outer_concave:
            return Curvature.CONCAVE
        return Curvature.UNKNOWN
    if outer_convex and ((increasing and inner.is_convex) or (decreasing and inner.is_concave)):
        return Curvature.CONVEX
    if outer_concave and ((increasing and inner.is_concave) or (decreasing and inner.is_convex)):
        return Curvature.CONCAVE
    return Curvature.UNKNOWN


def curvature(e: Expr, box) -> Curvature:
    """Curvature of ``e`` over ``box`` (convex, concave, linear or unknown)."""
    tags: Dict[int, Curvature] = {}
    ranges: Dict[int, Interval] = {}

    def rng(node: Expr) -> Interval:
        key = id(node)
        if key not in ranges:
            try:
                ranges[key] = interval_eval(node, box)
            except ExpressionDomainError:
                ranges[key] = Interval()
        return ranges[key]

    for node in topological(e):
        if isinstance(node, (Var, Const)):
            t = Curvature.LINEAR
        elif isinstance(node, Sum):
            t = Curvature.LINEAR
            for k, ch in zip(node.coeffs, node.children):
                t = _combine(t, tags[id(ch)].scale(k))
        elif isinstance(node, Neg):
            t = tags[id(node.child)].negate()
        elif isinstance(node, Product):
            t = _product_curvature(node, tags)
        elif isinstance(node, Pow):
            t = _pow_curvature(node, tags[id(node.child)], rng(node.child))
        elif isinstance(node, Exp):
            t = _compose(True, False, True, False, tags[id(node.child)])
        elif isinstance(node, Log):
            if rng(node.child).lo <= 0.0:
                t = Curvature.UNKNOWN
            else:
                t = _compose(False, True, True, False, tags[id(node.child)])
        else:
            t = Curvature.UNKNOWN
        tags[id(node)] = t
    return tags[id(e)]


def _pow_curvature(node: Pow, inner: Curvature, r: Interval) -> Curvature:
    n = node.exponent
    if n == 1:
        return inner
    if n % 2 == 0:
        convex, concave = True, False
        increasing, decreasing = r.lo >= 0.0, r.hi <= 0.0
    else:
        convex, concave = r.lo >= 0.0, r.hi <= 0.0
        increasing, decreasing = True, False
    return _compose(convex, concave, increasing, decreasing, inner)


def _product_curvature(node: Product, tags: Dict[int, Curvature]) -> Curvature:
    consts = [c for c in node.children if isinstance(c, Const)]
    others = [c for c in node.children if not isinstance(c, Const)]
    if len(others) > 1:
        return Curvature.UNKNOWN
    if not others:
        return Curvature.LINEAR
    k = 1.0
    for c in consts:
        k *= c.value
    return tags[id(others[0])].scale(k)

