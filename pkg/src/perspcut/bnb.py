"""LP-based branch and cut.

Each node propagates its bounds, solves the LP relaxation, and runs a few
separation rounds over the violated nonlinear constraints. Integral, feasible
LP points become incumbents; otherwise the node branches on the most
fractional binary or, once all binaries are integral, spatially on a variable
of the most violated nonlinear constraint. Nodes are explored best-first.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import lp as lpmod
from .cuts import PERSPECTIVE, PLAIN, LinearCut, Mode, SeparationSettings, estimate, \
    separate_constraint
from .detect import ScStructure, ScVarInfo, detect_structures, find_semicontinuous
from .model.expr import ExpressionDomainError, decompose, eval_expr, variables
from .model.instance import EQ, GE, LE, Instance, evaluate_aux
from .model.interval import Interval
from .propagation import Propagator

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
TIME_LIMIT = "time-limit"
NODE_LIMIT = "node-limit"

INT_TOL = 1e-6
FEAS_TOL = 1e-6
NODE_PROP_ROUNDS = 5
CLIP = 0.2
MIN_SPLIT_WIDTH = 1e-7


@dataclass(frozen=True)
class Settings:
    mode: Mode = Mode.FULL
    bound_tightening: bool = True
    gap_limit: float = 1e-4
    time_limit: float = 3600.0
    node_limit: int = 1_000_000
    root_rounds: int = 5
    node_rounds: int = 2
    seed: int = 0
    max_cuts_per_round: int = 2
    min_violation: float = 1e-5

    def __post_init__(self):
        if self.gap_limit < 0:
            raise ValueError("gap_limit must be nonnegative")

    @property
    def separation(self) -> SeparationSettings:
        return SeparationSettings(self.mode, self.bound_tightening, self.max_cuts_per_round,
                                  self.min_violation)

    @property
    def label(self) -> str:
        if self.mode is Mode.FULL and not self.bound_tightening:
            return "full-nobt"
        return self.mode.value


SETTING_NAMES = ("off", "convex", "full", "full-nobt")


def settings_for(name: str, **overrides) -> Settings:
    """Named setting: ``off``, ``convex``, ``full`` or ``full-nobt``."""
    name = name.lower()
    if name == "full-nobt":
        return Settings(mode=Mode.FULL, bound_tightening=False, **overrides)
    try:
        return Settings(mode=Mode(name), **overrides)
    except ValueError:
        raise ValueError(f"unknown setting {name!r}; expected one of {SETTING_NAMES}") from None


@dataclass
class SolveStats:
    status: str = INFEASIBLE
    primal: float = math.inf
    dual: float = -math.inf
    root_dual: float = -math.inf
    nodes: int = 0
    lp_iterations: int = 0
    cuts_plain: int = 0
    cuts_perspective: int = 0
    time: float = 0.0
    numerical_trouble: int = 0
    structures: int = 0

    @property
    def gap(self) -> float:
        if not math.isfinite(self.primal):
            return math.inf
        return (self.primal - self.dual) / max(1.0, abs(self.primal))


@dataclass
class Node:
    id: int
    lower: List[float]
    upper: List[float]
    depth: int = 0
    bound: float = -math.inf
    local_cuts: Tuple[int, ...] = ()
    basis: Optional[dict] = None
    decision: str = "root"

    def box(self) -> List[Interval]:
        return [Interval(l, u) for l, u in zip(self.lower, self.upper)]


@dataclass
class NodeOutcome:
    kind: str  # "pruned", "branched", "solved"
    children: Tuple[Node, ...] = ()
    bound: float = -math.inf
    point: Optional[np.ndarray] = None


def propagate_node(node: Node, inst: Instance, sc_infos: Sequence[ScVarInfo] = (),
                   propagator: Optional[Propagator] = None,
                   max_rounds: int = NODE_PROP_ROUNDS) -> Optional[Tuple[List[float], List[float]]]:
    """Fixed-point bound tightening of the node box.

    Binary bounds are not rounded here and indicators are never fixed by
    propagation; integrality is left to branching. A fixed indicator still
    collapses its semi-continuous variables.
    """
    prop = propagator or Propagator(inst)
    return prop.run(node.lower, node.upper, max_rounds=max_rounds, sc_infos=sc_infos,
                    round_binaries=False, fix_indicators=False)


def _nonlinear_vars(con) -> List[int]:
    _, _, terms = decompose(con.body)
    out = set()
    for _, t in terms:
        out.update(variables(t))
    return sorted(out)


def most_fractional(inst: Instance, point, lower, upper) -> Optional[int]:
    best, best_score = None, INT_TOL
    for j in inst.binaries:
        if lower[j] == upper[j]:
            continue
        frac = point[j] - math.floor(point[j])
        score = min(frac, 1.0 - frac)
        if score > best_score:
            best, best_score = j, score
    return best


def spatial_candidate(inst: Instance, point, lower, upper) -> Optional[Tuple[int, float]]:
    """``(variable, split value)`` for the most violated nonlinear constraint."""
    order = []
    for c in inst.nonlinear_constraints:
        try:
            r = c.residual(point)
        except (ExpressionDomainError, OverflowError):
            r = math.inf
        order.append(r)
    for i in sorted(range(len(order)), key=lambda k: (-order[k], k)):
        if order[i] <= 0.0:
            break
        cands = [j for j in _nonlinear_vars(inst.nonlinear_constraints[i])
                 if upper[j] - lower[j] > MIN_SPLIT_WIDTH * max(1.0, abs(point[j]))]
        if not cands:
            continue
        j = max(cands, key=lambda k: (upper[k] - lower[k], -k))
        return j, split_value(point[j], lower[j], upper[j])
    return None


def split_value(v: float, lb: float, ub: float) -> float:
    if not (math.isfinite(lb) and math.isfinite(ub)):
        if math.isfinite(lb):
            return max(v, lb + 1.0)
        if math.isfinite(ub):
            return min(v, ub - 1.0)
        return v
    w = ub - lb
    return min(max(v, lb + CLIP * w), ub - CLIP * w)


def branch(node: Node, inst: Instance, point, next_id) -> Tuple[Node, ...]:
    """Two children: on the most fractional binary, else spatially."""
    j = most_fractional(inst, point, node.lower, node.upper)
    if j is not None:
        lo0, hi0 = list(node.lower), list(node.upper)
        lo1, hi1 = list(node.lower), list(node.upper)
        hi0[j] = 0.0
        lo1[j] = 1.0
        specs = ((lo0, hi0, f"{inst.variables[j].name}=0"), (lo1, hi1, f"{inst.variables[j].name}=1"))
    else:
        cand = spatial_candidate(inst, point, node.lower, node.upper)
        if cand is None:
            return ()
        j, v = cand
        lo0, hi0 = list(node.lower), list(node.upper)
        lo1, hi1 = list(node.lower), list(node.upper)
        hi0[j] = v
        lo1[j] = v
        name = inst.variables[j].name
        specs = ((lo0, hi0, f"{name}<={v:.6g}"), (lo1, hi1, f"{name}>={v:.6g}"))
    return tuple(Node(next(next_id), lo, hi, node.depth + 1, node.bound, node.local_cuts,
                      node.basis, d) for lo, hi, d in specs)


class BranchAndCut:
    """One solve of an instance under one setting."""

    def __init__(self, inst: Instance, settings: Settings = Settings(),
                 structures: Optional[List[ScStructure]] = None,
                 sc: Optional[Dict] = None):
        self.inst = inst
        self.settings = settings
        self.sep = settings.separation
        if sc is None:
            sc = find_semicontinuous(inst)
        self.sc = sc
        self.sc_infos = list(sc.values())
        if structures is None:
            structures = detect_structures(inst, sc)
        self.structures = structures
        self.by_con: Dict[int, List[ScStructure]] = {}
        for s in structures:
            self.by_con.setdefault(s.constraint, []).append(s)
        self.prop = Propagator(inst)
        self.n = inst.n
        self.stats = SolveStats(structures=len(structures))
        self.cuts: List[LinearCut] = []
        self.cut_keys: Dict[tuple, int] = {}
        self.global_cuts: List[int] = []
        self._global_set: set = set()
        self._seen_local: set = set()
        self.incumbent: Optional[np.ndarray] = None
        self.ids = itertools.count()
        self.global_box: List[Interval] = inst.box()
        self.lp = lpmod.LpProblem([inst.variables[j].objective_coeff for j in range(self.n)],
                                  inst.lower, inst.upper)
        for i, row in enumerate(inst.linear_constraints):
            self.lp.add_row(row, key=("lin", i))
        self.active_local: set = set()
        self._start = 0.0

    # ------------------------------------------------------------------
    def _elapsed(self) -> float:
        return time.perf_counter() - self._start

    def _out_of_time(self) -> bool:
        return self._elapsed() >= self.settings.time_limit

    def _cutoff(self, bound: float) -> bool:
        if self.incumbent is None:
            return False
        p = self.stats.primal
        return (p - bound) / max(1.0, abs(p)) <= self.settings.gap_limit or bound >= p - 1e-9

    def _register(self, cut: LinearCut) -> Optional[int]:
        key = cut.key()
        if key in self.cut_keys:
            return None
        idx = len(self.cuts)
        self.cuts.append(cut)
        self.cut_keys[key] = idx
        if cut.provenance == PERSPECTIVE:
            self.stats.cuts_perspective += 1
        else:
            self.stats.cuts_plain += 1
        return idx

    def _sync_rows(self, node: Node) -> None:
        want = set(node.local_cuts) - self._global_set
        drop = [("cut", i) for i in self.active_local - want]
        self.lp.remove_rows(drop)
        for i in sorted(want - self.active_local):
            self.lp.add_row(self.cuts[i], key=("cut", i))
        self.active_local = want
        for j in range(self.n):
            self.lp.change_bounds(j, node.lower[j], node.upper[j])

    def _add_cut_rows(self, node: Node, cuts: List[LinearCut]) -> int:
        added = 0
        local = list(node.local_cuts)
        active = set(local)
        global_set = self._global_set
        for cut in cuts:
            idx = self.cut_keys.get(cut.key())
            if idx is None:
                idx = self._register(cut)
            elif idx in global_set or idx in active:
                continue
            make_local = cut.local and node.depth > 0
            self.lp.add_row(self.cuts[idx], key=("cut", idx))
            if make_local:
                local.append(idx)
                active.add(idx)
                self.active_local.add(idx)
                self._seen_local.add(idx)
            else:
                # a cut first met as local may later be derived from global data
                self.global_cuts.append(idx)
                global_set.add(idx)
            added += 1
        node.local_cuts = tuple(local)
        return added

    # ------------------------------------------------------------------
    def _initial_cuts(self) -> None:
        """Unstrengthened estimators at a reference point so the first LP is bounded."""
        box = self.global_box
        ref = np.zeros(self.n)
        for j, b in enumerate(box):
            if b.is_finite:
                ref[j] = 0.5 * (b.lo + b.hi)
            else:
                ref[j] = min(max(0.0, b.lo), b.hi)
        cuts = []
        for i, con in enumerate(self.inst.nonlinear_constraints):
            sides = []
            if con.sense in (LE, EQ):
                sides.append(False)
            if con.sense in (GE, EQ):
                sides.append(True)
            for over in sides:
                est, dep = estimate(con.body, box, ref, over=over, global_box=box)
                if est is None:
                    continue
                s = -1.0 if over else 1.0
                coeffs = {j: s * k for j, k in est.coeffs.items()}
                coeffs[con.aux_var] = coeffs.get(con.aux_var, 0.0) - s
                if all(math.isfinite(k) for k in coeffs.values()) and math.isfinite(est.constant):
                    cuts.append(LinearCut(coeffs, -s * est.constant + 0.0, PLAIN, est.kind,
                                          False, i))
        for cut in cuts:
            idx = self._register(cut)
            if idx is not None:
                self.lp.add_row(cut, key=("cut", idx))
                self.global_cuts.append(idx)
                self._global_set.add(idx)

    def _separate(self, node: Node, point, prober) -> List[LinearCut]:
        box = node.box()
        out: List[LinearCut] = []
        for i, con in enumerate(self.inst.nonlinear_constraints):
            out.extend(separate_constraint(point, con, self.by_con.get(i, ()), self.sep, box,
                                           prober, self.global_box, index=i))
        return out

    def _make_prober(self, node: Node):
        cache: Dict[int, Optional[List[Interval]]] = {}

        def prober(z: int):
            if z not in cache:
                if node.lower[z] >= 1.0 or node.upper[z] <= 0.0:
                    lo, hi = node.lower, node.upper
                    res = (lo, hi) if node.upper[z] >= 1.0 else None
                else:
                    lo, hi = list(node.lower), list(node.upper)
                    lo[z] = hi[z] = 1.0
                    res = self.prop.run(lo, hi, max_rounds=10, sc_infos=self.sc_infos)
                cache[z] = None if res is None else [Interval(l, u) for l, u in zip(*res)]
            return cache[z]

        if not self.sep.bound_tightening or self.sep.mode is not Mode.FULL:
            return None
        return prober

    # ------------------------------------------------------------------
    def _try_incumbent(self, point) -> bool:
        p = evaluate_aux(self.inst, point)
        for j in self.inst.binaries:
            p[j] = float(round(p[j]))
        p = evaluate_aux(self.inst, p)
        return self._accept(p) or self._fix_and_lp(point)

    def _accept(self, p) -> bool:
        try:
            viol = self.inst.original_violation(p)
        except (ExpressionDomainError, OverflowError, ValueError):
            return False
        for v in self.inst.variables:
            if not v.lower - FEAS_TOL <= p[v.id] <= v.upper + FEAS_TOL and not v.is_aux:
                return False
        if viol > FEAS_TOL:
            return False
        obj = self.inst.objective_value(p)
        if obj < self.stats.primal - 1e-12:
            self.stats.primal = obj
            self.incumbent = np.asarray(p, dtype=float)
            log.debug("incumbent %.10g", obj)
            return True
        return False

    def _fix_and_lp(self, point) -> bool:
        inst = self.inst
        lo, hi = list(inst.lower), list(inst.upper)
        fixed: Dict[int, float] = {}
        for j in inst.binaries:
            fixed[j] = float(round(min(max(point[j], lo[j]), hi[j])))
        nl_vars = set()
        for con in inst.nonlinear_constraints:
            nl_vars.update(_nonlinear_vars(con))
        aux_of = {c.aux_var: c for c in inst.nonlinear_constraints}
        for j in sorted(nl_vars):
            if j not in aux_of:
                fixed[j] = min(max(float(point[j]), lo[j]), hi[j])
        vals = [float(x) for x in point]
        vals = [fixed.get(j, v) for j, v in enumerate(vals)]
        for con in inst.nonlinear_constraints:
            if con.aux_var in nl_vars:
                for j in variables(con.body):
                    fixed.setdefault(j, min(max(vals[j], lo[j]), hi[j]))
                    vals[j] = fixed[j]
                try:
                    v = eval_expr(con.body, vals)
                except (ExpressionDomainError, OverflowError):
                    return False
                fixed[con.aux_var] = min(max(v, lo[con.aux_var]), hi[con.aux_var])
                vals[con.aux_var] = fixed[con.aux_var]
        for j, v in fixed.items():
            lo[j] = hi[j] = v
        prob = lpmod.LpProblem([v.objective_coeff for v in inst.variables], lo, hi)
        for row in inst.linear_constraints:
            prob.add_row(row)
        for con in inst.nonlinear_constraints:
            k0, lin, terms = decompose(con.body)
            const = k0
            try:
                for coef, t in terms:
                    const += coef * eval_expr(t, vals)
            except (ExpressionDomainError, OverflowError):
                return False
            coeffs = dict(lin)
            coeffs[con.aux_var] = coeffs.get(con.aux_var, 0.0) - 1.0
            lhs = -const if con.sense in (GE, EQ) else -math.inf
            rhs = -const if con.sense in (LE, EQ) else math.inf
            prob.add_row((coeffs, lhs, rhs))
        res = prob.solve()
        self.stats.lp_iterations += res.iterations
        if res.status != lpmod.OPTIMAL:
            return False
        p = evaluate_aux(inst, res.primal)
        return self._accept(p)

    # ------------------------------------------------------------------
    def process_node(self, node: Node) -> NodeOutcome:
        bounds = propagate_node(node, self.inst, self.sc_infos, self.prop)
        if bounds is None:
            return NodeOutcome("pruned", bound=math.inf)
        node.lower, node.upper = bounds
        self._sync_rows(node)
        prober = self._make_prober(node)
        rounds = self.settings.root_rounds if node.depth == 0 else self.settings.node_rounds
        res = None
        point = None
        for r in range(rounds + 1):
            res = self.lp.solve(warm=node.basis)
            self.stats.lp_iterations += res.iterations
            node.basis = res.basis
            if res.status == lpmod.INFEASIBLE:
                return NodeOutcome("pruned", bound=math.inf)
            if res.status == lpmod.OPTIMAL:
                node.bound = max(node.bound, res.objective)
                point = res.primal
                if self._cutoff(node.bound):
                    return NodeOutcome("pruned", bound=node.bound)
            elif res.status == lpmod.UNBOUNDED:
                point = res.primal
            else:
                self.stats.numerical_trouble += 1
                break
            if r == rounds or self._out_of_time():
                break
            cuts = self._separate(node, point, prober)
            if not cuts or self._add_cut_rows(node, cuts) == 0:
                break
        if node.depth == 0:
            self.stats.root_dual = node.bound
        if point is None:
            return NodeOutcome("branched", branch(node, self.inst, self._midpoint(node), self.ids),
                               bound=node.bound)
        if res.status == lpmod.OPTIMAL:
            if node.depth == 0 or most_fractional(self.inst, point, node.lower, node.upper) is None \
                    or node.id % 20 == 0:
                self._try_incumbent(point)
            if self._cutoff(node.bound):
                return NodeOutcome("pruned", bound=node.bound)
        children = branch(node, self.inst, point, self.ids)
        if not children:
            if res.status != lpmod.OPTIMAL:
                self.stats.numerical_trouble += 1
            elif self.inst.original_violation(evaluate_aux(self.inst, point)) > FEAS_TOL:
                self.stats.numerical_trouble += 1
            return NodeOutcome("solved", bound=node.bound, point=point)
        return NodeOutcome("branched", children, bound=node.bound, point=point)

    def _midpoint(self, node: Node) -> List[float]:
        return [split_value(0.0, l, u) if not (math.isfinite(l) and math.isfinite(u))
                else 0.5 * (l + u) for l, u in zip(node.lower, node.upper)]

    # ------------------------------------------------------------------
    def solve(self) -> Tuple[Optional[np.ndarray], SolveStats]:
        self._start = time.perf_counter()
        st = self.stats
        root = Node(next(self.ids), list(self.inst.lower), list(self.inst.upper))
        bounds = propagate_node(root, self.inst, self.sc_infos, self.prop, max_rounds=10)
        if bounds is None:
            st.status, st.dual, st.root_dual = INFEASIBLE, math.inf, math.inf
            st.time = self._elapsed()
            return None, st
        root.lower, root.upper = bounds
        self.global_box = root.box()
        self._initial_cuts()
        heap: List[Tuple[float, int, Node]] = [(root.bound, root.id, root)]
        leaf_min = math.inf
        status = None
        while heap:
            if self._out_of_time():
                status = TIME_LIMIT
                break
            if st.nodes >= self.settings.node_limit:
                status = NODE_LIMIT
                break
            bound, _, node = heapq.heappop(heap)
            if self._cutoff(bound):
                leaf_min = min(leaf_min, bound)
                continue
            st.nodes += 1
            out = self.process_node(node)
            if out.kind == "branched":
                for ch in out.children:
                    ch.bound = max(ch.bound, node.bound)
                    ch.local_cuts = node.local_cuts
                    ch.basis = node.basis
                    heapq.heappush(heap, (ch.bound, ch.id, ch))
            else:
                leaf_min = min(leaf_min, out.bound)
            if node.depth == 0 and out.kind == "pruned" and not math.isfinite(st.root_dual):
                st.root_dual = out.bound
        open_min = min((b for b, _, _ in heap), default=math.inf)
        st.dual = min(open_min, leaf_min, st.primal)
        if status is None:
            status = OPTIMAL if self.incumbent is not None else INFEASIBLE
            if status == INFEASIBLE:
                st.dual = math.inf
        st.status = status
        st.time = self._elapsed()
        return self.incumbent, st


def solve(inst: Instance, settings: Settings = Settings(),
          structures: Optional[List[ScStructure]] = None) -> Tuple[Optional[np.ndarray], SolveStats]:
    """Solve ``inst`` to the gap limit; returns the incumbent (or ``None``) and statistics."""
    return BranchAndCut(inst, settings, structures).solve()
