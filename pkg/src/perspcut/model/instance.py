"""Problem representation and the extended reformulation.

Every nonlinear constraint is stored as ``body (<=|>=|=) w`` with an
auxiliary variable ``w``; the original right-hand side becomes a bound row on
``w``. Constraints whose nonlinear bodies are syntactically identical share a
single auxiliary.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

from .curvature import Curvature, curvature
from .expr import (Expr, Product, Sum, UnsupportedExpressionError, Var, affine_coefficients,
                   decompose, eval_expr, is_affine, linear_sum, substitute, variables)
from .interval import INF, Interval, interval_eval

CONTINUOUS = "continuous"
BINARY = "binary"

LE, GE, EQ = "<=", ">=", "="
SENSES = (LE, GE, EQ)


@dataclass(frozen=True)
class Variable:
    id: int
    name: str
    kind: str = CONTINUOUS
    lower: float = -INF
    upper: float = INF
    objective_coeff: float = 0.0
    is_aux: bool = False

    def __post_init__(self):
        if self.kind not in (CONTINUOUS, BINARY):
            raise ValueError(f"unknown variable kind {self.kind!r}")
        if self.lower > self.upper:
            raise ValueError(f"variable {self.name}: lower {self.lower} > upper {self.upper}")
        if self.kind == BINARY and (self.lower < 0.0 or self.upper > 1.0):
            raise ValueError(f"binary variable {self.name} must have bounds within [0, 1]")

    @property
    def is_binary(self) -> bool:
        return self.kind == BINARY


@dataclass(frozen=True)
class LinearConstraint:
    """``lhs <= sum(coeffs[j] * v_j) <= rhs``."""

    coeffs: Dict[int, float]
    lhs: float = -INF
    rhs: float = INF
    name: str = ""

    def activity(self, point) -> float:
        return sum(k * point[j] for j, k in self.coeffs.items())

    def violation(self, point) -> float:
        a = self.activity(point)
        return max(self.lhs - a, a - self.rhs, 0.0)


@dataclass(frozen=True)
class NonlinearConstraint:
    """``body (sense) aux_var`` with ``aux_var`` restricted to ``aux_bounds``."""

    body: Expr
    aux_var: int
    sense: str
    aux_bounds: Interval
    name: str = ""

    def residual(self, point) -> float:
        """Amount by which ``point`` violates ``body sense w`` (0 when satisfied)."""
        d = eval_expr(self.body, point) - point[self.aux_var]
        if self.sense == LE:
            return max(d, 0.0)
        if self.sense == GE:
            return max(-d, 0.0)
        return abs(d)


@dataclass(frozen=True)
class RawConstraint:
    """A constraint as written by the user: ``expr sense rhs``.

    With ``defines`` set (only for ``=``), the constraint reads
    ``expr = v_defines`` and the named variable serves as its auxiliary.
    """

    expr: Expr
    sense: str
    rhs: float = 0.0
    defines: Optional[int] = None
    name: str = ""

    def __post_init__(self):
        if self.sense not in SENSES:
            raise ValueError(f"unknown sense {self.sense!r}")
        if self.defines is not None and self.sense != EQ:
            raise ValueError("defining constraints must be equalities")

    def violation(self, point) -> float:
        lhs = eval_expr(self.expr, point)
        rhs = point[self.defines] if self.defines is not None else self.rhs
        if self.sense == LE:
            return max(lhs - rhs, 0.0)
        if self.sense == GE:
            return max(rhs - lhs, 0.0)
        return abs(lhs - rhs)


@dataclass(frozen=True)
class Instance:
    variables: Tuple[Variable, ...]
    linear_constraints: Tuple[LinearConstraint, ...]
    nonlinear_constraints: Tuple[NonlinearConstraint, ...]
    original_constraints: Tuple[RawConstraint, ...] = ()
    n_original: int = 0
    name: str = ""

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def objective(self) -> Dict[int, float]:
        return {v.id: v.objective_coeff for v in self.variables if v.objective_coeff != 0.0}

    @property
    def names(self) -> List[str]:
        return [v.name for v in self.variables]

    @property
    def binaries(self) -> List[int]:
        return [v.id for v in self.variables if v.is_binary]

    @property
    def lower(self) -> List[float]:
        return [v.lower for v in self.variables]

    @property
    def upper(self) -> List[float]:
        return [v.upper for v in self.variables]

    def box(self) -> List[Interval]:
        return [Interval(v.lower, v.upper) for v in self.variables]

    def var_index(self, name: str) -> int:
        for v in self.variables:
            if v.name == name:
                return v.id
        raise KeyError(name)

    def objective_value(self, point) -> float:
        return sum(v.objective_coeff * point[v.id] for v in self.variables)

    def original_violation(self, point) -> float:
        """Largest violation of declared bounds, integrality and original constraints."""
        worst = 0.0
        for v in self.variables[: self.n_original]:
            x = point[v.id]
            worst = max(worst, v.lower - x, x - v.upper)
            if v.is_binary:
                worst = max(worst, abs(x - round(x)))
        for c in self.original_constraints:
            worst = max(worst, c.violation(point))
        return worst


def _strip_constant(e: Expr) -> Tuple[Expr, float]:
    if isinstance(e, Sum) and e.constant != 0.0:
        return linear_sum(zip(e.coeffs, e.children)), e.constant
    return e, 0.0


def check_supported(body: Expr, box) -> None:
    """Reject bodies the estimators cannot relax.

    Allowed nonlinear terms: univariate expressions, products of two distinct
    variables, and multivariate terms with a definite curvature on ``box``.
    """
    _, _, terms = decompose(body)
    for _, term in terms:
        vs = variables(term)
        if len(vs) <= 1:
            continue
        if (isinstance(term, Product) and len(term.children) == 2
                and all(isinstance(c, Var) for c in term.children)):
            continue
        if curvature(term, box) is not Curvature.UNKNOWN:
            continue
        raise UnsupportedExpressionError(
            f"nonlinear term {term!r} is neither univariate, bilinear, nor of known curvature")


def _order_nonlinear(cons: List[NonlinearConstraint]) -> List[NonlinearConstraint]:
    """Stable topological order: a constraint defining ``w`` precedes bodies that use ``w``."""
    definer = {c.aux_var: i for i, c in enumerate(cons)}
    state = [0] * len(cons)
    out: List[NonlinearConstraint] = []

    def visit(i: int) -> None:
        if state[i] == 2:
            return
        if state[i] == 1:
            raise ValueError("cyclic auxiliary-variable definitions")
        state[i] = 1
        for v in variables(cons[i].body):
            j = definer.get(v)
            if j is not None and j != i:
                visit(j)
        state[i] = 2
        out.append(cons[i])

    for i in range(len(cons)):
        visit(i)
    return out


def to_extended_form(variables_: Sequence[Variable], raw: Sequence[RawConstraint],
                     name: str = "") -> Instance:
    """Build an :class:`Instance` with every nonlinear constraint as ``h ⋚ w``."""
    vars_: List[Variable] = [replace(v, id=i) for i, v in enumerate(variables_)]
    n_original = len(vars_)
    box = [Interval(v.lower, v.upper) for v in vars_]
    linear: List[LinearConstraint] = []
    nonlinear: List[Optional[NonlinearConstraint]] = []
    shared: Dict[Expr, int] = {}  # body -> index into ``nonlinear``
    aux_defined = set()

    for r_i, rc in enumerate(raw):
        cname = rc.name or f"c{r_i}"
        for j in variables(rc.expr):
            if not 0 <= j < n_original:
                raise ValueError(f"constraint {cname} references unknown variable {j}")
        if rc.defines is not None:
            w = rc.defines
            if w in variables(rc.expr):
                raise ValueError(f"constraint {cname}: defined variable occurs in its body")
            if is_affine(rc.expr):
                coeffs, c0 = affine_coefficients(rc.expr)
                coeffs[w] = coeffs.get(w, 0.0) - 1.0
                linear.append(LinearConstraint(coeffs, -c0, -c0, cname))
                continue
            if w in aux_defined or vars_[w].is_binary:
                raise ValueError(f"constraint {cname}: variable {vars_[w].name} cannot be an auxiliary")
            check_supported(rc.expr, box)
            aux_defined.add(w)
            rng = interval_eval(rc.expr, box).intersect(box[w]) or box[w]
            vars_[w] = replace(vars_[w], lower=rng.lo, upper=rng.hi)
            box[w] = rng
            nonlinear.append(NonlinearConstraint(rc.expr, w, EQ, rng, cname))
            continue

        body, c0 = _strip_constant(rc.expr)
        rhs = rc.rhs - c0
        lo = rhs if rc.sense in (GE, EQ) else -INF
        hi = rhs if rc.sense in (LE, EQ) else INF
        if is_affine(body):
            coeffs, c1 = affine_coefficients(body)
            linear.append(LinearConstraint(coeffs, lo - c1, hi - c1, cname))
            continue
        check_supported(body, box)
        k = shared.get(body)
        if k is None:
            w = len(vars_)
            rng = interval_eval(body, box)
            vars_.append(Variable(w, f"_w{w}", CONTINUOUS, rng.lo, rng.hi, 0.0, True))
            box.append(rng)
            shared[body] = len(nonlinear)
            nonlinear.append(NonlinearConstraint(body, w, rc.sense, rng, cname))
        else:
            old = nonlinear[k]
            w = old.aux_var
            sense = old.sense if old.sense == rc.sense else EQ
            nonlinear[k] = replace(old, sense=sense)
        linear.append(LinearConstraint({w: 1.0}, lo, hi, cname))
        tight = box[w].intersect(Interval(lo, hi))
        if tight is not None:
            box[w] = tight
            vars_[w] = replace(vars_[w], lower=tight.lo, upper=tight.hi)
            k = shared[body]
            nonlinear[k] = replace(nonlinear[k], aux_bounds=tight)

    ordered = _order_nonlinear([c for c in nonlinear if c is not None])
    return Instance(tuple(vars_), tuple(linear), tuple(ordered), tuple(raw), n_original, name)


def permute_instance(inst: Instance, seed: int) -> Instance:
    """Same model with the order of declared variables and constraints shuffled."""
    rng = random.Random(seed)
    order = list(range(inst.n_original))
    rng.shuffle(order)
    mapping = {old: new for new, old in enumerate(order)}
    new_vars = [replace(inst.variables[old], id=mapping[old]) for old in order]
    raws = list(inst.original_constraints)
    rng.shuffle(raws)
    new_raw = [replace(rc, expr=substitute(rc.expr, mapping),
                       defines=None if rc.defines is None else mapping[rc.defines])
               for rc in raws]
    return to_extended_form(new_vars, new_raw, name=inst.name)


def evaluate_aux(inst: Instance, point) -> List[float]:
    """Copy of ``point`` with each auxiliary recomputed from its body where needed.

    Auxiliaries that already satisfy their constraint keep their value.
    """
    p = [float(x) for x in point]
    for c in inst.nonlinear_constraints:
        try:
            val = eval_expr(c.body, p)
        except (ValueError, OverflowError):
            continue
        cur = p[c.aux_var]
        if c.sense == EQ or (c.sense == LE and val > cur) or (c.sense == GE and val < cur):
            p[c.aux_var] = val
    return p

