"""Detection of semi-continuous variables and perspective-suitable constraints.

A variable ``y`` is semi-continuous with respect to a binary ``z`` when a pair
of implied bounds ``y <= au*z + bu`` and ``y >= al*z + bl`` shares its
constant (``bu == bl``): then ``y`` equals that constant when ``z = 0`` and
lies in ``[al + bl, au + bu]`` when ``z = 1``. Pairs come from two-variable
linear rows (together with the variable's own bounds) and, failing that,
from probing ``z``. Auxiliaries defined by equality constraints whose bodies
are entirely semi-continuous inherit the property through interval
evaluation of the body.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .model.expr import Expr, Var, decompose, eval_expr, linear_sum, variables
from .model.curvature import curvature
from .model.instance import EQ, GE, LE, Instance, NonlinearConstraint
from .model.interval import Interval, interval_eval
from .propagation import Propagator

log = logging.getLogger(__name__)

UPPER, LOWER = "upper", "lower"
BETA_RTOL = 1e-9
PROBE_ROUNDS = 10


@dataclass(frozen=True)
class ImpliedBound:
    """``var <= alpha*indicator + beta`` (upper) or ``var >= alpha*indicator + beta`` (lower)."""

    var: int
    indicator: int
    direction: str
    alpha: float
    beta: float


@dataclass(frozen=True)
class ScVarInfo:
    var: int
    indicator: int
    off_value: float
    on_lower: float
    on_upper: float

    @property
    def on_domain(self) -> Interval:
        return Interval(self.on_lower, self.on_upper)


@dataclass(frozen=True)
class ScStructure:
    """Split ``body = sc_part + nsc_part`` of one constraint for one indicator."""

    constraint: int
    indicator: int
    sc_part: Expr
    nsc_part: Dict[int, float]
    sc_vars: Tuple[ScVarInfo, ...]
    split_index: int

    @property
    def off_point(self) -> Dict[int, float]:
        return {s.var: s.off_value for s in self.sc_vars}

    @property
    def on_box(self) -> Dict[int, Interval]:
        return {s.var: s.on_domain for s in self.sc_vars}

    @property
    def f_off(self) -> float:
        return eval_expr(self.sc_part, self.off_point)


@dataclass(frozen=True)
class ProbeResult:
    """Tightened boxes for ``indicator = 0`` and ``= 1`` (``None`` if that fixing is infeasible)."""

    indicator: int
    off: Optional[Tuple[List[float], List[float]]]
    on: Optional[Tuple[List[float], List[float]]]

    @property
    def fixed_value(self) -> Optional[int]:
        """Value the indicator can be fixed to when exactly one fixing is feasible."""
        if self.off is None and self.on is not None:
            return 1
        if self.on is None and self.off is not None:
            return 0
        return None


def probe(inst: Instance, indicator: int, lo: Optional[Sequence[float]] = None,
          hi: Optional[Sequence[float]] = None, sc_infos=(), max_rounds: int = PROBE_ROUNDS,
          propagator: Optional[Propagator] = None, which: Tuple[int, ...] = (0, 1)
          ) -> ProbeResult:
    """Fix ``indicator`` to 0 and to 1 and propagate each fixing to a fixed point."""
    if not inst.variables[indicator].is_binary:
        raise ValueError(f"variable {indicator} is not binary")
    prop = propagator or Propagator(inst)
    lo = list(inst.lower if lo is None else lo)
    hi = list(inst.upper if hi is None else hi)
    out = {}
    for value in (0, 1):
        if value not in which or not lo[indicator] <= value <= hi[indicator]:
            out[value] = None
            continue
        l2, h2 = list(lo), list(hi)
        l2[indicator] = h2[indicator] = float(value)
        out[value] = prop.run(l2, h2, max_rounds=max_rounds, sc_infos=sc_infos)
    return ProbeResult(indicator, out[0], out[1])


def derive_sc_info(upper: ImpliedBound, lower: ImpliedBound) -> Optional[ScVarInfo]:
    if upper.var != lower.var or upper.indicator != lower.indicator:
        raise ValueError("implied bounds refer to different variables or indicators")
    if abs(upper.beta - lower.beta) > BETA_RTOL * max(1.0, abs(upper.beta)):
        return None
    on_lower = lower.alpha + lower.beta
    on_upper = upper.alpha + upper.beta
    if on_lower > on_upper:
        return None
    return ScVarInfo(upper.var, upper.indicator, upper.beta, on_lower, on_upper)


def explicit_implied_bounds(inst: Instance) -> List[ImpliedBound]:
    """Implied bounds read off linear rows in one continuous variable and one binary."""
    out: List[ImpliedBound] = []
    for row in inst.linear_constraints:
        if len(row.coeffs) != 2:
            continue
        (j1, a1), (j2, a2) = row.coeffs.items()
        b1, b2 = inst.variables[j1].is_binary, inst.variables[j2].is_binary
        if b1 == b2:
            continue
        (z, az), (y, ay) = ((j1, a1), (j2, a2)) if b1 else ((j2, a2), (j1, a1))
        for side, bound in ((+1, row.rhs), (-1, row.lhs)):
            if abs(bound) == float("inf"):
                continue
            # side=+1: ay*y <= bound - az*z ; side=-1: ay*y >= bound - az*z
            alpha, beta = -az / ay, bound / ay
            is_upper = (ay > 0) == (side > 0)
            out.append(ImpliedBound(y, z, UPPER if is_upper else LOWER, alpha, beta))
    return out


def _intersect_infos(infos: List[ScVarInfo], lo: float, hi: float) -> Optional[ScVarInfo]:
    base = infos[0]
    on_lo, on_hi = max(base.on_lower, lo), min(base.on_upper, hi)
    for s in infos[1:]:
        if abs(s.off_value - base.off_value) <= BETA_RTOL * max(1.0, abs(base.off_value)):
            on_lo, on_hi = max(on_lo, s.on_lower), min(on_hi, s.on_upper)
    if on_lo > on_hi:
        return None
    return ScVarInfo(base.var, base.indicator, base.off_value, on_lo, on_hi)


def _from_explicit(inst: Instance, bounds: List[ImpliedBound]) -> Dict[Tuple[int, int], ScVarInfo]:
    grouped: Dict[Tuple[int, int], Dict[str, List[ImpliedBound]]] = {}
    for b in bounds:
        grouped.setdefault((b.var, b.indicator), {UPPER: [], LOWER: []})[b.direction].append(b)
    out = {}
    for (y, z), sides in grouped.items():
        v = inst.variables[y]
        uppers = sides[UPPER] + [ImpliedBound(y, z, UPPER, 0.0, v.upper)]
        lowers = sides[LOWER] + [ImpliedBound(y, z, LOWER, 0.0, v.lower)]
        cands = []
        for u in uppers:
            for l in lowers:
                if u.alpha == 0.0 and l.alpha == 0.0:
                    continue
                if abs(u.beta) == float("inf") or abs(l.beta) == float("inf"):
                    continue
                info = derive_sc_info(u, l)
                if info is not None:
                    cands.append(info)
        if cands:
            info = _intersect_infos(cands, v.lower, v.upper)
            if info is not None:
                out[(y, z)] = info
    return out


def _from_probe(inst: Instance, res: ProbeResult) -> Dict[Tuple[int, int], ScVarInfo]:
    out = {}
    if res.off is None or res.on is None:
        return out
    (lo0, hi0), (lo1, hi1) = res.off, res.on
    z = res.indicator
    for v in inst.variables:
        y = v.id
        if v.is_binary or v.lower == v.upper:
            continue
        if hi0[y] - lo0[y] > BETA_RTOL * max(1.0, abs(hi0[y])):
            continue
        if hi1[y] - lo1[y] <= BETA_RTOL * max(1.0, abs(hi1[y])) and abs(lo1[y] - lo0[y]) <= BETA_RTOL:
            continue
        up = ImpliedBound(y, z, UPPER, hi1[y] - hi0[y], hi0[y])
        dn = ImpliedBound(y, z, LOWER, lo1[y] - lo0[y], lo0[y])
        info = derive_sc_info(up, dn)
        if info is not None:
            out[(y, z)] = info
    return out


def lift_aux_sc(con: NonlinearConstraint, sc_infos: Mapping[int, ScVarInfo],
                indicator: int) -> Optional[ScVarInfo]:
    """Semi-continuity of ``con.aux_var`` when every body variable is semi-continuous."""
    vs = variables(con.body)
    if any(v not in sc_infos or sc_infos[v].indicator != indicator for v in vs):
        return None
    off = {v: sc_infos[v].off_value for v in vs}
    box = {v: sc_infos[v].on_domain for v in vs}
    on = interval_eval(con.body, box)
    if not on.is_finite:
        return None
    return ScVarInfo(con.aux_var, indicator, eval_expr(con.body, off), on.lo, on.hi)


def find_semicontinuous(inst: Instance, probing: bool = True
                        ) -> Dict[Tuple[int, int], ScVarInfo]:
    """All ``(var, indicator) -> ScVarInfo`` pairs (explicit rows, then lifting, then probing)."""
    sc = _from_explicit(inst, explicit_implied_bounds(inst))
    probed: Dict[Tuple[int, int], ScVarInfo] = {}
    if probing:
        prop = Propagator(inst)
        for z in inst.binaries:
            res = probe(inst, z, propagator=prop)
            if res.fixed_value is not None:
                log.info("probing: %s can be fixed to %d", inst.variables[z].name, res.fixed_value)
            probed.update(_from_probe(inst, res))
    defined = {c.aux_var for c in inst.nonlinear_constraints if c.sense == EQ}
    for key, info in probed.items():
        if key not in sc and key[0] not in defined:
            sc[key] = info
    for con in inst.nonlinear_constraints:
        if con.sense != EQ:
            continue
        for z in inst.binaries:
            if (con.aux_var, z) in sc:
                continue
            per_z = {y: s for (y, zz), s in sc.items() if zz == z}
            lifted = lift_aux_sc(con, per_z, z)
            if lifted is None:
                lifted = probed.get((con.aux_var, z))
            if lifted is not None:
                sc[(con.aux_var, z)] = lifted
    return sc


def split_constraint(inst: Instance, index: int, indicator: int,
                     sc: Mapping[Tuple[int, int], ScVarInfo]) -> Optional[ScStructure]:
    """Structure of constraint ``index`` for ``indicator``, or ``None`` if it does not qualify."""
    con = inst.nonlinear_constraints[index]
    k0, lin, terms = decompose(con.body)
    if not terms:
        return None
    for _, term in terms:
        if any((v, indicator) not in sc for v in variables(term)):
            return None
    sc_terms = [(c, t) for c, t in terms]
    nsc: Dict[int, float] = {}
    for j, k in lin.items():
        if (j, indicator) in sc:
            sc_terms.append((k, Var(j)))
        else:
            nsc[j] = k
    sc_part = linear_sum(sc_terms, k0)
    vs = variables(sc_part)
    infos = tuple(sc[(v, indicator)] for v in vs)
    r = sum(1 for v in vs if inst.variables[v].is_aux or _is_defined(inst, v))
    return ScStructure(index, indicator, sc_part, nsc, infos, r)


def _is_defined(inst: Instance, v: int) -> bool:
    return any(c.aux_var == v for c in inst.nonlinear_constraints)


def detect_structures(inst: Instance, sc: Optional[Mapping] = None,
                      probing: bool = True) -> List[ScStructure]:
    """One :class:`ScStructure` per qualifying (constraint, indicator) pair."""
    if sc is None:
        sc = find_semicontinuous(inst, probing=probing)
    indicators = sorted({z for (_, z) in sc})
    out: List[ScStructure] = []
    for i, _ in enumerate(inst.nonlinear_constraints):
        for z in indicators:
            s = split_constraint(inst, i, z, sc)
            if s is not None:
                out.append(s)
    return out


CONVEX, NONCONVEX = "convex", "nonconvex"


def structure_domain(s: ScStructure) -> Dict[int, Interval]:
    """Hull of the on-box and the off point, per semi-continuous variable."""
    return {v.var: v.on_domain.hull(Interval(v.off_value, v.off_value)) for v in s.sc_vars}


def classify_structure(inst: Instance, s: ScStructure) -> str:
    """``convex`` when the sense of the constraint only asks for curvature that ``sc_part`` has."""
    curv = curvature(s.sc_part, structure_domain(s))
    sense = inst.nonlinear_constraints[s.constraint].sense
    ok = ((sense not in (LE, EQ) or curv.is_convex)
          and (sense not in (GE, EQ) or curv.is_concave))
    return CONVEX if ok else NONCONVEX
