"""Feasibility-based bound tightening over linear rows and nonlinear constraints.

Linear rows use activity bounds. Nonlinear constraints propagate forward from
the body enclosure onto the auxiliary variable and backward onto variables
that appear linearly in the body. Semi-continuity links (indicator fixed to 0
or 1) are applied at the end of every round.
"""

from __future__ import annotations

import math
from typing import Iterable, List, Optional, Sequence, Tuple

from .model.expr import ExpressionDomainError, decompose
from .model.instance import EQ, GE, LE, Instance
from .model.interval import INF, Interval, interval_eval

IMPROVE_TOL = 1e-7
INFEAS_TOL = 1e-9
INT_TOL = 1e-6


class Propagator:
    """Reusable bound tightener for one instance."""

    def __init__(self, inst: Instance):
        self.inst = inst
        self.binary = [v.is_binary for v in inst.variables]
        self.rows: List[Tuple[List[int], List[float], float, float]] = [
            (list(r.coeffs), list(r.coeffs.values()), r.lhs, r.rhs)
            for r in inst.linear_constraints if r.coeffs]
        self.nonlinear = []
        for c in inst.nonlinear_constraints:
            k0, lin, terms = decompose(c.body)
            self.nonlinear.append((c, k0, lin, terms))

    # ------------------------------------------------------------------
    def run(self, lo: Sequence[float], hi: Sequence[float], max_rounds: int = 10,
            sc_infos: Iterable = (), threshold: float = IMPROVE_TOL,
            round_binaries: bool = True, fix_indicators: bool = True
            ) -> Optional[Tuple[List[float], List[float]]]:
        """Tighten ``[lo, hi]`` to a fixed point; ``None`` when infeasible.

        With ``round_binaries=False`` binary bounds are treated as continuous,
        and with ``fix_indicators=False`` semi-continuity links only act once
        the indicator is fixed (they never move the indicator itself).
        """
        lo, hi = [float(x) for x in lo], [float(x) for x in hi]
        sc_infos = list(sc_infos)
        binary = self.binary if round_binaries else [False] * len(self.binary)
        state = _State(lo, hi, binary, threshold)
        for j in range(len(lo)):
            if binary[j]:
                state.round_binary(j)
        if state.infeasible:
            return None
        for _ in range(max_rounds):
            state.changed = False
            for idx, a, lhs, rhs in self.rows:
                _propagate_row(state, idx, a, lhs, rhs)
                if state.infeasible:
                    return None
            for item in self.nonlinear:
                _propagate_nonlinear(state, *item)
                if state.infeasible:
                    return None
            _apply_sc(state, sc_infos, fix_indicators)
            if state.infeasible:
                return None
            if not state.changed:
                break
        return state.lo, state.hi


class _State:
    __slots__ = ("lo", "hi", "binary", "threshold", "changed", "infeasible")

    def __init__(self, lo, hi, binary, threshold):
        self.lo, self.hi, self.binary = lo, hi, binary
        self.threshold = threshold
        self.changed = False
        self.infeasible = False

    def _check(self, j: int) -> None:
        if self.lo[j] > self.hi[j]:
            if self.lo[j] > self.hi[j] + INFEAS_TOL * max(1.0, abs(self.lo[j])):
                self.infeasible = True
            else:
                mid = 0.5 * (self.lo[j] + self.hi[j])
                self.lo[j] = self.hi[j] = mid

    def round_binary(self, j: int) -> None:
        self.lo[j] = float(math.ceil(self.lo[j] - INT_TOL))
        self.hi[j] = float(math.floor(self.hi[j] + INT_TOL))
        self._check(j)

    def tighten_lo(self, j: int, v: float) -> None:
        old = self.lo[j]
        if math.isnan(v) or v <= old:
            return
        if math.isfinite(old) and v - old <= self.threshold * max(1.0, abs(old)):
            return
        self.lo[j] = v
        self.changed = True
        if self.binary[j]:
            self.round_binary(j)
        else:
            self._check(j)

    def tighten_hi(self, j: int, v: float) -> None:
        old = self.hi[j]
        if math.isnan(v) or v >= old:
            return
        if math.isfinite(old) and old - v <= self.threshold * max(1.0, abs(old)):
            return
        self.hi[j] = v
        self.changed = True
        if self.binary[j]:
            self.round_binary(j)
        else:
            self._check(j)

    def intersect(self, j: int, lo: float, hi: float) -> None:
        """Exact intersection (no improvement threshold), used for fixings."""
        if lo > self.lo[j]:
            self.lo[j] = lo
            self.changed = True
        if hi < self.hi[j]:
            self.hi[j] = hi
            self.changed = True
        self._check(j)


def _term_bounds(a: float, l: float, u: float) -> Tuple[float, float]:
    if a > 0:
        return (a * l if l > -INF else -INF), (a * u if u < INF else INF)
    return (a * u if u < INF else -INF), (a * l if l > -INF else INF)


def _sum_excluding(parts: List[Tuple[float, float]]):
    """Totals of lower/upper parts and counts of infinite entries."""
    slo = shi = 0.0
    nlo = nhi = 0
    for pl, ph in parts:
        if pl == -INF:
            nlo += 1
        else:
            slo += pl
        if ph == INF:
            nhi += 1
        else:
            shi += ph
    return slo, nlo, shi, nhi


def _residual(total: float, count: int, own: float, inf: float) -> float:
    """Sum of all parts except ``own``; ``inf`` marks the infinite side."""
    if own == inf:
        return total if count == 1 else inf
    return inf if count > 0 else total - own


def _propagate_row(state: _State, idx, a, lhs, rhs) -> None:
    lo, hi = state.lo, state.hi
    parts = [_term_bounds(k, lo[j], hi[j]) for j, k in zip(idx, a)]
    slo, nlo, shi, nhi = _sum_excluding(parts)
    minact = -INF if nlo else slo
    maxact = INF if nhi else shi
    tol = 1e-9 * max(1.0, abs(lhs) if lhs > -INF else 1.0, abs(rhs) if rhs < INF else 1.0)
    if minact > rhs + max(tol, 1e-7) or maxact < lhs - max(tol, 1e-7):
        state.infeasible = True
        return
    for (j, k), (pl, ph) in zip(zip(idx, a), parts):
        if rhs < INF:
            rest = _residual(slo, nlo, pl, -INF)
            if rest > -INF:
                bound = (rhs - rest) / k
                if k > 0:
                    state.tighten_hi(j, bound)
                else:
                    state.tighten_lo(j, bound)
        if lhs > -INF:
            rest = _residual(shi, nhi, ph, INF)
            if rest < INF:
                bound = (lhs - rest) / k
                if k > 0:
                    state.tighten_lo(j, bound)
                else:
                    state.tighten_hi(j, bound)
        if state.infeasible:
            return


def _propagate_nonlinear(state: _State, con, k0, lin, terms) -> None:
    box = _BoxView(state)
    parts: List[Tuple[float, float]] = [(k0, k0)]
    try:
        for coef, term in terms:
            r = interval_eval(term, box).scale(coef)
            parts.append((r.lo, r.hi))
    except ExpressionDomainError:
        state.infeasible = True
        return
    lin_items = list(lin.items())
    lin_parts = [_term_bounds(k, state.lo[j], state.hi[j]) for j, k in lin_items]
    slo, nlo, shi, nhi = _sum_excluding(parts + lin_parts)
    body_lo = -INF if nlo else slo
    body_hi = INF if nhi else shi
    w = con.aux_var
    if con.sense in (LE, EQ):
        state.tighten_lo(w, body_lo)
    if con.sense in (GE, EQ):
        state.tighten_hi(w, body_hi)
    if state.infeasible:
        return
    # backward onto variables appearing linearly: k*v = body - rest
    w_lo, w_hi = state.lo[w], state.hi[w]
    for (j, k), (pl, ph) in zip(lin_items, lin_parts):
        if con.sense in (LE, EQ) and w_hi < INF:
            rest = _residual(slo, nlo, pl, -INF)
            if rest > -INF:
                bound = (w_hi - rest) / k
                (state.tighten_hi if k > 0 else state.tighten_lo)(j, bound)
        if con.sense in (GE, EQ) and w_lo > -INF:
            rest = _residual(shi, nhi, ph, INF)
            if rest < INF:
                bound = (w_lo - rest) / k
                (state.tighten_lo if k > 0 else state.tighten_hi)(j, bound)
        if state.infeasible:
            return


def _apply_sc(state: _State, sc_infos, fix_indicators: bool = True) -> None:
    lo, hi = state.lo, state.hi
    for info in sc_infos:
        z, y = info.indicator, info.var
        if hi[z] <= 0.0:
            state.intersect(y, info.off_value, info.off_value)
        elif lo[z] >= 1.0:
            state.intersect(y, info.on_lower, info.on_upper)
        elif fix_indicators:
            off_ok = lo[y] - 1e-9 <= info.off_value <= hi[y] + 1e-9
            on_ok = max(lo[y], info.on_lower) <= min(hi[y], info.on_upper) + 1e-9
            if not off_ok and not on_ok:
                state.infeasible = True
            elif not off_ok:
                state.intersect(z, 1.0, 1.0)
                state.intersect(y, info.on_lower, info.on_upper)
            elif not on_ok:
                state.intersect(z, 0.0, 0.0)
                state.intersect(y, info.off_value, info.off_value)
        if state.infeasible:
            return


class _BoxView:
    """Index-by-variable view of the current bounds as intervals."""

    __slots__ = ("state",)

    def __init__(self, state: _State):
        self.state = state

    def __getitem__(self, j: int) -> Interval:
        return Interval(self.state.lo[j], self.state.hi[j])
