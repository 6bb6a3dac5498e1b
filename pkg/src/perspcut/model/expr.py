"""Immutable expression DAG with evaluation and reverse-mode gradients.

Nodes are frozen dataclasses, so structurally identical subtrees compare and
hash equal. That identity is what the extended reformulation uses to share
auxiliary variables between constraints with the same nonlinear body.

Points are any sequence (or mapping) indexable by variable id.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Tuple, Union

Number = Union[int, float]


class ExpressionDomainError(ValueError):
    """Raised when an expression is evaluated outside its domain (log of x <= 0)."""


class UnsupportedExpressionError(ValueError):
    """Raised for expressions outside the grammar the relaxation can handle."""


class Expr:
    """Base class of all expression nodes."""

    __slots__ = ()

    # operator sugar, so tests and generators can write ``-y**3 + y - x``
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, neg(as_expr(other)))

    def __rsub__(self, other):
        return add(other, neg(self))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return mul(self, 1.0 / other)
        if isinstance(other, Const):
            return mul(self, 1.0 / other.value)
        raise UnsupportedExpressionError("division is only supported by constants")

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, exponent)


@dataclass(frozen=True, eq=True)
class Var(Expr):
    id: int

    def __repr__(self) -> str:
        return f"v{self.id}"


@dataclass(frozen=True, eq=True)
class Const(Expr):
    value: float

    def __repr__(self) -> str:
        return repr(self.value)


@dataclass(frozen=True, eq=True)
class Sum(Expr):
    """Affine combination ``constant + sum(coeffs[k] * children[k])``."""

    children: Tuple[Expr, ...]
    coeffs: Tuple[float, ...]
    constant: float = 0.0

    def __repr__(self) -> str:
        parts = [f"{c!r}*{ch!r}" for c, ch in zip(self.coeffs, self.children)]
        if self.constant:
            parts.append(repr(self.constant))
        return "(" + " + ".join(parts) + ")"


@dataclass(frozen=True, eq=True)
class Product(Expr):
    children: Tuple[Expr, ...]

    def __repr__(self) -> str:
        return "(" + "*".join(repr(c) for c in self.children) + ")"


@dataclass(frozen=True, eq=True)
class Pow(Expr):
    child: Expr
    exponent: int

    def __post_init__(self):
        if not isinstance(self.exponent, int) or self.exponent < 1:
            raise UnsupportedExpressionError(
                f"exponent must be an integer >= 1, got {self.exponent!r}")

    def __repr__(self) -> str:
        return f"{self.child!r}^{self.exponent}"


@dataclass(frozen=True, eq=True)
class Exp(Expr):
    child: Expr

    def __repr__(self) -> str:
        return f"exp({self.child!r})"


@dataclass(frozen=True, eq=True)
class Log(Expr):
    child: Expr

    def __repr__(self) -> str:
        return f"log({self.child!r})"


@dataclass(frozen=True, eq=True)
class Neg(Expr):
    child: Expr

    def __repr__(self) -> str:
        return f"-{self.child!r}"


# ---------------------------------------------------------------------------
# construction helpers
# ---------------------------------------------------------------------------

def var(i: int) -> Var:
    return Var(i)


def const(v: Number) -> Const:
    return Const(float(v))


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float)):
        return Const(float(x))
    raise TypeError(f"cannot convert {x!r} to an expression")


def _scaled_terms(e: Expr, scale: float, out: Dict[Expr, float]) -> float:
    """Flatten ``scale * e`` into ``out``; returns the constant part."""
    if isinstance(e, Const):
        return scale * e.value
    if isinstance(e, Sum):
        c = scale * e.constant
        for coef, ch in zip(e.coeffs, e.children):
            c += _scaled_terms(ch, scale * coef, out)
        return c
    if isinstance(e, Neg):
        return _scaled_terms(e.child, -scale, out)
    out[e] = out.get(e, 0.0) + scale
    return 0.0


def linear_sum(terms: Iterable[Tuple[float, Expr]], constant: float = 0.0) -> Expr:
    """Build a flattened sum; collapses to a bare child or constant when possible."""
    acc: Dict[Expr, float] = {}
    c = float(constant)
    for coef, e in terms:
        c += _scaled_terms(as_expr(e), float(coef), acc)
    items = [(ch, k) for ch, k in acc.items() if k != 0.0]
    if not items:
        return Const(c)
    if len(items) == 1 and c == 0.0 and items[0][1] == 1.0:
        return items[0][0]
    return Sum(tuple(ch for ch, _ in items), tuple(k for _, k in items), c)


def add(a, b) -> Expr:
    return linear_sum([(1.0, as_expr(a)), (1.0, as_expr(b))])


def neg(a: Expr) -> Expr:
    a = as_expr(a)
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, (Sum, Var)):
        return linear_sum([(-1.0, a)])
    if isinstance(a, Neg):
        return a.child
    return Neg(a)


def mul(a, b) -> Expr:
    a, b = as_expr(a), as_expr(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if isinstance(b, Const):
        a, b = b, a
    if isinstance(a, Const):
        if a.value == 0.0:
            return Const(0.0)
        return linear_sum([(a.value, b)])
    if a == b:
        return Pow(a, 2)
    factors: List[Expr] = []
    for f in (a, b):
        factors.extend(f.children if isinstance(f, Product) else (f,))
    return Product(tuple(factors))


def power(a, n) -> Expr:
    a = as_expr(a)
    if isinstance(n, float):
        if not n.is_integer():
            raise UnsupportedExpressionError(f"non-integer exponent {n}")
        n = int(n)
    if n == 1:
        return a
    if isinstance(a, Const):
        return Const(a.value ** n)
    return Pow(a, n)


def exp(a) -> Expr:
    a = as_expr(a)
    return Const(math.exp(a.value)) if isinstance(a, Const) else Exp(a)


def log(a) -> Expr:
    a = as_expr(a)
    if isinstance(a, Const):
        if a.value <= 0:
            raise ExpressionDomainError("log of non-positive constant")
        return Const(math.log(a.value))
    return Log(a)


# ---------------------------------------------------------------------------
# traversal
# ---------------------------------------------------------------------------

def children(e: Expr) -> Tuple[Expr, ...]:
    if isinstance(e, (Sum, Product)):
        return e.children
    if isinstance(e, (Pow, Exp, Log, Neg)):
        return (e.child,)
    return ()


def topological(e: Expr) -> List[Expr]:
    """Nodes of the DAG in post-order (children before parents), each once."""
    order: List[Expr] = []
    seen = set()
    stack = [(e, False)]
    while stack:
        node, expanded = stack.pop()
        key = id(node)
        if expanded:
            order.append(node)
            continue
        if key in seen:
            continue
        seen.add(key)
        stack.append((node, True))
        for ch in children(node):
            if id(ch) not in seen:
                stack.append((ch, False))
    return order


def variables(e: Expr) -> Tuple[int, ...]:
    """Sorted ids of all variables occurring in ``e``."""
    return tuple(sorted({n.id for n in topological(e) if isinstance(n, Var)}))


def is_affine(e: Expr) -> bool:
    if isinstance(e, (Var, Const)):
        return True
    if isinstance(e, Sum):
        return all(is_affine(c) for c in e.children)
    if isinstance(e, Neg):
        return is_affine(e.child)
    return False


def affine_coefficients(e: Expr) -> Tuple[Dict[int, float], float]:
    """Coefficient map and constant of an affine expression."""
    coeffs: Dict[int, float] = {}

    def walk(node: Expr, scale: float) -> float:
        if isinstance(node, Const):
            return scale * node.value
        if isinstance(node, Var):
            coeffs[node.id] = coeffs.get(node.id, 0.0) + scale
            return 0.0
        if isinstance(node, Sum):
            c = scale * node.constant
            for k, ch in zip(node.coeffs, node.children):
                c += walk(ch, scale * k)
            return c
        if isinstance(node, Neg):
            return walk(node.child, -scale)
        raise ValueError(f"expression is not affine: {node!r}")

    constant = walk(e, 1.0)
    return {k: v for k, v in coeffs.items() if v != 0.0}, constant


def decompose(e: Expr) -> Tuple[float, Dict[int, float], List[Tuple[float, Expr]]]:
    """Split ``e`` into ``constant + linear + sum(coef * nonlinear_term)``.

    Scalar multiples inside products (``2*x*y``) are pulled into the coefficient.
    """
    acc: Dict[Expr, float] = {}
    constant = _scaled_terms(e, 1.0, acc)
    linear: Dict[int, float] = {}
    terms: List[Tuple[float, Expr]] = []
    for node, k in acc.items():
        if k == 0.0:
            continue
        if isinstance(node, Var):
            linear[node.id] = linear.get(node.id, 0.0) + k
        else:
            terms.append((k, node))
    return constant, linear, terms


def substitute(e: Expr, mapping: Mapping[int, int]) -> Expr:
    """Rename variables according to ``mapping`` (old id -> new id)."""
    memo: Dict[int, Expr] = {}
    for node in topological(e):
        if isinstance(node, Var):
            out = Var(mapping.get(node.id, node.id))
        elif isinstance(node, Const):
            out = node
        elif isinstance(node, Sum):
            out = Sum(tuple(memo[id(c)] for c in node.children), node.coeffs, node.constant)
        elif isinstance(node, Product):
            out = Product(tuple(memo[id(c)] for c in node.children))
        elif isinstance(node, Pow):
            out = Pow(memo[id(node.child)], node.exponent)
        else:
            out = type(node)(memo[id(node.child)])
        memo[id(node)] = out
    return memo[id(e)]


# ---------------------------------------------------------------------------
# evaluation and differentiation
# ---------------------------------------------------------------------------

def _forward(order: List[Expr], point) -> Dict[int, float]:
    val: Dict[int, float] = {}
    for node in order:
        if isinstance(node, Var):
            v = float(point[node.id])
        elif isinstance(node, Const):
            v = node.value
        elif isinstance(node, Sum):
            v = node.constant
            for k, ch in zip(node.coeffs, node.children):
                v += k * val[id(ch)]
        elif isinstance(node, Product):
            v = 1.0
            for ch in node.children:
                v *= val[id(ch)]
        elif isinstance(node, Pow):
            v = val[id(node.child)] ** node.exponent
        elif isinstance(node, Exp):
            v = math.exp(val[id(node.child)])
        elif isinstance(node, Log):
            a = val[id(node.child)]
            if a <= 0.0:
                raise ExpressionDomainError(f"log of non-positive value {a}")
            v = math.log(a)
        elif isinstance(node, Neg):
            v = -val[id(node.child)]
        else:
            raise TypeError(f"unknown node {node!r}")
        val[id(node)] = v
    return val


def eval_expr(e: Expr, point) -> float:
    """Value of ``e`` at ``point``."""
    return _forward(topological(e), point)[id(e)]


def gradient(e: Expr, point) -> Dict[int, float]:
    """Sparse gradient ``{var id: d e / d var}`` by reverse accumulation."""
    order = topological(e)
    val = _forward(order, point)
    adj: Dict[int, float] = {id(e): 1.0}
    grad: Dict[int, float] = {}
    for node in reversed(order):
        g = adj.get(id(node), 0.0)
        if g == 0.0:
            continue
        if isinstance(node, Var):
            grad[node.id] = grad.get(node.id, 0.0) + g
        elif isinstance(node, Sum):
            for k, ch in zip(node.coeffs, node.children):
                adj[id(ch)] = adj.get(id(ch), 0.0) + g * k
        elif isinstance(node, Product):
            vals = [val[id(ch)] for ch in node.children]
            for i, ch in enumerate(node.children):
                p = 1.0
                for j, v in enumerate(vals):
                    if j != i:
                        p *= v
                adj[id(ch)] = adj.get(id(ch), 0.0) + g * p
        elif isinstance(node, Pow):
            a = val[id(node.child)]
            d = node.exponent * a ** (node.exponent - 1)
            adj[id(node.child)] = adj.get(id(node.child), 0.0) + g * d
        elif isinstance(node, Exp):
            adj[id(node.child)] = adj.get(id(node.child), 0.0) + g * val[id(node)]
        elif isinstance(node, Log):
            adj[id(node.child)] = adj.get(id(node.child), 0.0) + g / val[id(node.child)]
        elif isinstance(node, Neg):
            adj[id(node.child)] = adj.get(id(node.child), 0.0) - g
    return grad


def to_infix(e: Expr, names) -> str:
    """Render ``e`` in the instance-file grammar; ``names[i]`` names variable i.

    Floats are written with ``repr`` so that parsing the text reproduces the
    same expression bit for bit.
    """
    if isinstance(e, Var):
        return names[e.id]
    if isinstance(e, Const):
        return repr(e.value) if e.value >= 0 else f"({e.value!r})"
    if isinstance(e, Sum):
        parts = []
        for k, ch in zip(e.coeffs, e.children):
            body = to_infix(ch, names)
            parts.append(f"{k!r}*{body}" if k >= 0 else f"({k!r})*{body}")
        if e.constant != 0.0 or not parts:
            parts.append(repr(e.constant) if e.constant >= 0 else f"({e.constant!r})")
        return "(" + " + ".join(parts) + ")"
    if isinstance(e, Product):
        return "(" + " * ".join(to_infix(c, names) for c in e.children) + ")"
    if isinstance(e, Pow):
        return f"({to_infix(e.child, names)})^{e.exponent}"
    if isinstance(e, Exp):
        return f"exp({to_infix(e.child, names)})"
    if isinstance(e, Log):
        return f"log({to_infix(e.child, names)})"
    if isinstance(e, Neg):
        return f"(-{to_infix(e.child, names)})"
    raise TypeError(f"unknown node {e!r}")
