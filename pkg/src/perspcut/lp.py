"""Dense bounded-variable primal simplex with incremental rows and bound changes.

Each row ``lhs <= a.x <= rhs`` receives a slack ``s = a.x`` carrying the row
bounds, so the working system is ``[A | -I] (x, s) = 0`` with every variable
boxed. The solver starts from the slack basis (or a warm basis keyed by
column and row identity) and runs a composite phase 1 that minimizes the sum
of basic infeasibilities before switching to the true objective.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, Hashable, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration-limit"

_BASIC, _LOWER, _UPPER, _FREE = "B", "L", "U", "F"


@dataclass(frozen=True)
class LpConfig:
    feas_tol: float = 1e-7
    opt_tol: float = 1e-9
    zero_tol: float = 1e-12
    pivot_tol: float = 1e-9
    refactor_every: int = 50
    bland_after: int = 1000
    max_iter: int = 1_000_000


DEFAULT_CONFIG = LpConfig()


@dataclass
class LpResult:
    status: str
    objective: float
    primal: np.ndarray
    iterations: int
    duals: Dict[Hashable, float] = field(default_factory=dict)
    reduced_costs: Optional[np.ndarray] = None
    basis: Optional[Dict[Tuple[str, Hashable], str]] = None

    @property
    def dual_bound(self) -> float:
        """Bound this LP contributes to a minimization tree (``-inf`` unless optimal)."""
        if self.status == OPTIMAL:
            return self.objective
        if self.status == INFEASIBLE:
            return math.inf
        return -math.inf


def _row_data(row) -> Tuple[Dict[int, float], float, float]:
    """Accepts a LinearCut, a LinearConstraint, or a ``(coeffs, lhs, rhs)`` triple."""
    if isinstance(row, tuple):
        coeffs, lhs, rhs = row
        return dict(coeffs), float(lhs), float(rhs)
    coeffs = dict(row.coeffs)
    if hasattr(row, "lhs"):
        return coeffs, float(row.lhs), float(row.rhs)
    return coeffs, -math.inf, float(row.rhs)


class LpProblem:
    """Minimize ``c.x`` subject to row activity and column bounds."""

    def __init__(self, objective: Sequence[float], lower: Sequence[float],
                 upper: Sequence[float], config: LpConfig = DEFAULT_CONFIG):
        self.c = np.asarray(objective, dtype=float).copy()
        self.lower = np.asarray(lower, dtype=float).copy()
        self.upper = np.asarray(upper, dtype=float).copy()
        if not (len(self.c) == len(self.lower) == len(self.upper)):
            raise ValueError("objective and bound vectors differ in length")
        if np.any(self.lower > self.upper):
            raise ValueError("crossed column bounds")
        self.config = config
        self._rows: Dict[Hashable, Tuple[Dict[int, float], float, float]] = {}
        self._auto = itertools.count()

    @property
    def n(self) -> int:
        return len(self.c)

    @property
    def m(self) -> int:
        return len(self._rows)

    @property
    def row_keys(self) -> List[Hashable]:
        return list(self._rows)

    def copy(self) -> "LpProblem":
        out = LpProblem(self.c, self.lower, self.upper, self.config)
        out._rows = dict(self._rows)
        out._auto = itertools.count(next(self._auto))
        return out

    def add_row(self, row, key: Optional[Hashable] = None) -> Hashable:
        coeffs, lhs, rhs = _row_data(row)
        for j in coeffs:
            if not 0 <= j < self.n:
                raise ValueError(f"row references unknown column {j}")
        if key is None:
            key = ("auto", next(self._auto))
        if key in self._rows:
            raise ValueError(f"duplicate row key {key!r}")
        self._rows[key] = (coeffs, lhs, rhs)
        return key

    def add_rows(self, rows: Iterable, keys: Optional[Iterable[Hashable]] = None
                 ) -> List[Hashable]:
        if keys is None:
            return [self.add_row(r) for r in rows]
        return [self.add_row(r, k) for r, k in zip(rows, keys)]

    def remove_rows(self, keys: Iterable[Hashable]) -> None:
        for k in keys:
            del self._rows[k]

    def change_bounds(self, j: int, lower: float, upper: float) -> None:
        if lower > upper:
            raise ValueError(f"crossed bounds for column {j}: {lower} > {upper}")
        self.lower[j], self.upper[j] = lower, upper

    def solve(self, warm: Optional[Mapping] = None, max_iter: Optional[int] = None) -> LpResult:
        return _Simplex(self, warm, max_iter or self.config.max_iter).run()


class _Simplex:
    def __init__(self, prob: LpProblem, warm, max_iter: int):
        cfg = self.cfg = prob.config
        self.prob = prob
        self.max_iter = max_iter
        n, m = prob.n, prob.m
        self.n, self.m, self.N = n, m, n + m
        self.keys = [("c", j) for j in range(n)] + [("r", k) for k in prob.row_keys]
        A = np.zeros((m, n + m))
        lo = np.empty(n + m)
        hi = np.empty(n + m)
        lo[:n], hi[:n] = prob.lower, prob.upper
        for i, (coeffs, lhs, rhs) in enumerate(prob._rows.values()):
            for j, k in coeffs.items():
                A[i, j] += k
            A[i, n + i] = -1.0
            lo[n + i], hi[n + i] = lhs, rhs
        self.A, self.lo, self.hi = A, lo, hi
        self.cost = np.zeros(n + m)
        self.cost[:n] = prob.c
        self.crossed = bool(np.any(lo > hi + cfg.feas_tol))
        self._init_basis(warm)

    # ------------------------------------------------------------------
    def _default_status(self, j: int) -> str:
        if self.lo[j] > -math.inf:
            return _LOWER
        if self.hi[j] < math.inf:
            return _UPPER
        return _FREE

    def _init_basis(self, warm) -> None:
        n, m = self.n, self.m
        status = [self._default_status(j) for j in range(self.N)]
        basis = list(range(n, n + m))
        if warm:
            got = [warm.get(k) for k in self.keys]
            cand = [j for j, s in enumerate(got) if s == _BASIC]
            covered = set(cand)
            for i in range(m):
                if len(cand) >= m:
                    break
                if got[n + i] is None and n + i not in covered:
                    cand.append(n + i)
                    covered.add(n + i)
            if len(cand) == m:
                try:
                    binv = np.linalg.inv(self.A[:, cand]) if m else np.zeros((0, 0))
                    ok = bool(np.all(np.isfinite(binv))) and (
                        m == 0 or np.linalg.cond(self.A[:, cand]) < 1e12)
                except np.linalg.LinAlgError:
                    ok = False
                if ok:
                    basis = cand
                    for j, s in enumerate(got):
                        if s in (_LOWER, _UPPER, _FREE):
                            status[j] = s
        for j in range(self.N):
            s = status[j]
            if s == _LOWER and self.lo[j] == -math.inf:
                status[j] = self._default_status(j)
            elif s == _UPPER and self.hi[j] == math.inf:
                status[j] = self._default_status(j)
            elif s == _FREE and (self.lo[j] > -math.inf or self.hi[j] < math.inf):
                status[j] = self._default_status(j)
        for j in basis:
            status[j] = _BASIC
        self.basis = np.array(basis, dtype=int)
        self.status = status
        self.x = np.zeros(self.N)
        for j in range(self.N):
            self.x[j] = self._nonbasic_value(j)
        self.binv = self._factor()

    def _nonbasic_value(self, j: int) -> float:
        s = self.status[j]
        if s == _LOWER:
            return self.lo[j]
        if s == _UPPER:
            return self.hi[j]
        return 0.0

    def _factor(self) -> np.ndarray:
        if self.m == 0:
            return np.zeros((0, 0))
        return np.linalg.inv(self.A[:, self.basis])

    def _reset_to_slack_basis(self) -> None:
        self.basis = np.arange(self.n, self.N)
        for j in range(self.N):
            self.status[j] = self._default_status(j)
        for j in self.basis:
            self.status[j] = _BASIC
        for j in range(self.N):
            if self.status[j] != _BASIC:
                self.x[j] = self._nonbasic_value(j)
        self.binv = np.eye(self.m) * -1.0

    def _compute_basics(self) -> None:
        xn = self.x.copy()
        xn[self.basis] = 0.0
        self.x[self.basis] = -self.binv @ (self.A @ xn)

    # ------------------------------------------------------------------
    def run(self) -> LpResult:
        cfg = self.cfg
        if self.crossed:
            return self._result(INFEASIBLE, 0)
        it = 0
        since_refactor = 0
        degenerate = 0
        refactor_checks = 0
        while True:
            self._compute_basics()
            xb = self.x[self.basis]
            lob, hib = self.lo[self.basis], self.hi[self.basis]
            below = xb < lob - cfg.feas_tol
            above = xb > hib + cfg.feas_tol
            phase1 = bool(below.any() or above.any())
            if phase1:
                cb = np.where(below, -1.0, np.where(above, 1.0, 0.0))
                cost = np.zeros(self.N)
            else:
                cb = self.cost[self.basis]
                cost = self.cost
            y = cb @ self.binv if self.m else np.zeros(0)
            d = cost - (y @ self.A if self.m else 0.0)
            d[self.basis] = 0.0
            q, direction = self._price(d, degenerate >= cfg.bland_after)
            if q < 0:
                if since_refactor and refactor_checks < 3:
                    # confirm with a fresh factorization before declaring termination
                    refactor_checks += 1
                    since_refactor = 0
                    self._refresh()
                    continue
                return self._result(INFEASIBLE if phase1 else OPTIMAL, it, y, d)
            if it >= self.max_iter:
                return self._result(ITERATION_LIMIT, it, y, d)
            it += 1
            alpha = self.binv @ self.A[:, q] if self.m else np.zeros(0)
            delta = -alpha * direction
            t, r, leave_at = self._ratio(delta, below, above, degenerate >= cfg.bland_after)
            span = self.hi[q] - self.lo[q]
            if self.status[q] != _FREE and span <= t:
                t = span
                r = -1
            if not math.isfinite(t):
                if phase1:
                    self._refresh()
                    since_refactor = 0
                    continue
                return self._result(UNBOUNDED, it, y, d)
            if t * max(1.0, float(np.max(np.abs(delta))) if delta.size else 1.0) <= cfg.zero_tol:
                degenerate += 1
            else:
                degenerate = 0
            if r < 0:
                self.status[q] = _UPPER if direction > 0 else _LOWER
                self.x[q] = self._nonbasic_value(q)
                continue
            self.x[q] += direction * t
            leaving = int(self.basis[r])
            self.status[leaving] = leave_at
            self.x[leaving] = self.lo[leaving] if leave_at == _LOWER else self.hi[leaving]
            self.basis[r] = q
            self.status[q] = _BASIC
            since_refactor += 1
            refactor_checks = 0
            if since_refactor >= cfg.refactor_every:
                since_refactor = 0
                self._refresh()
            else:
                self._eta_update(alpha, r)

    def _refresh(self) -> None:
        try:
            binv = self._factor()
            if not np.all(np.isfinite(binv)):
                raise np.linalg.LinAlgError("non-finite inverse")
            self.binv = binv
        except np.linalg.LinAlgError:
            self._reset_to_slack_basis()

    def _eta_update(self, alpha: np.ndarray, r: int) -> None:
        piv = alpha[r]
        row = self.binv[r] / piv
        self.binv -= np.outer(alpha, row)
        self.binv[r] = row

    def _price(self, d: np.ndarray, bland: bool) -> Tuple[int, int]:
        tol = self.cfg.opt_tol
        best, best_score, best_dir = -1, 0.0, 0
        for j in range(self.N):
            s = self.status[j]
            if s == _BASIC or self.lo[j] == self.hi[j]:
                continue
            dj = d[j]
            if dj < -tol and s in (_LOWER, _FREE):
                direction = 1
            elif dj > tol and s in (_UPPER, _FREE):
                direction = -1
            else:
                continue
            if bland:
                return j, direction
            if abs(dj) > best_score:
                best, best_score, best_dir = j, abs(dj), direction
        return best, best_dir

    def _ratio(self, delta, below, above, bland: bool) -> Tuple[float, int, str]:
        cfg = self.cfg
        best_t, best_r, best_piv, at = math.inf, -1, 0.0, _LOWER
        for i in range(self.m):
            di = delta[i]
            if abs(di) <= cfg.pivot_tol:
                continue
            j = self.basis[i]
            xi, li, ui = self.x[j], self.lo[j], self.hi[j]
            if below[i]:
                if di <= 0:
                    continue
                lim, where = (li - xi) / di, _LOWER
            elif above[i]:
                if di >= 0:
                    continue
                lim, where = (xi - ui) / -di, _UPPER
            elif di < 0:
                if li == -math.inf:
                    continue
                lim, where = (xi - li) / -di, _LOWER
            else:
                if ui == math.inf:
                    continue
                lim, where = (ui - xi) / di, _UPPER
            lim = max(lim, 0.0)
            if lim < best_t - cfg.zero_tol:
                best_t, best_r, best_piv, at = lim, i, abs(di), where
            elif lim <= best_t + cfg.zero_tol:
                if bland:
                    if j < self.basis[best_r]:
                        best_t, best_r, best_piv, at = min(lim, best_t), i, abs(di), where
                elif abs(di) > best_piv:
                    best_t, best_r, best_piv, at = min(lim, best_t), i, abs(di), where
        return best_t, best_r, at

    # ------------------------------------------------------------------
    def _result(self, status: str, it: int, y=None, d=None) -> LpResult:
        n = self.n
        primal = self.x[:n].copy()
        obj = float(self.prob.c @ primal) if status == OPTIMAL else math.nan
        if status == INFEASIBLE:
            obj = math.inf
        elif status == UNBOUNDED:
            obj = -math.inf
        duals = {}
        if y is not None and status == OPTIMAL:
            duals = {k: float(v) for k, v in zip(self.prob.row_keys, y)}
        basis = {k: s for k, s in zip(self.keys, self.status)}
        return LpResult(status, obj, primal, it, duals,
                        None if d is None else d[:n].copy(), basis)
