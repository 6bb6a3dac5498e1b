"""Independent reference solvers used only by the tests.

Both oracles enumerate every binary assignment. The facility inner problem is
a convex QP handed to cvxpy; the cubic inner problem is separable and solved
per unit by a shrinking 1-D grid.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from perspcut.families import CubicData, FacilityData, cubic_data, facility_data


def grid_minimize(f, lo: float, hi: float, tol: float = 1e-7, points: int = 2001) -> tuple:
    """Global minimum of a smooth 1-D function by iterative grid zooming."""
    best_x, best_f = lo, f(np.array([lo]))[0]
    a, b = lo, hi
    while True:
        xs = np.linspace(a, b, points)
        fs = f(xs)
        k = int(np.argmin(fs))
        if fs[k] < best_f:
            best_x, best_f = xs[k], fs[k]
        step = (b - a) / (points - 1)
        if step < tol:
            return float(best_x), float(best_f)
        a, b = max(lo, xs[k] - 2 * step), min(hi, xs[k] + 2 * step)


def cubic_optimum(seed: int, n: int = 4) -> float:
    d: CubicData = cubic_data(seed, n)
    unit_on = []
    for i in range(n):
        g = lambda y, i=i: d.a[i] * y ** 3 - d.b[i] * y ** 2 + d.e[i] * y - d.revenue[i] * y
        _, val = grid_minimize(g, d.lo[i], d.hi[i])
        unit_on.append(val + d.fixed[i])
    best = math.inf
    for z in itertools.product((0, 1), repeat=n):
        if sum(z) < d.min_on:
            continue
        best = min(best, sum(v for v, zi in zip(unit_on, z) if zi))
    return best


def facility_optimum(seed: int, n_fac: int = 3, n_cust: int = 4) -> float:
    import cvxpy as cp

    d: FacilityData = facility_data(seed, n_fac, n_cust)
    best = math.inf
    for z in itertools.product((0, 1), repeat=n_fac):
        y = cp.Variable(n_fac)
        x = cp.Variable((n_fac, n_cust), nonneg=True)
        cons = [cp.sum(x, axis=0) == np.array(d.demand), cp.sum(x, axis=1) == y,
                x <= np.tile(np.array(d.demand), (n_fac, 1))]
        for i in range(n_fac):
            cons += [y[i] >= d.cap_lo[i] * z[i], y[i] <= d.cap_hi[i] * z[i]]
        cost = (sum(d.fixed[i] * z[i] for i in range(n_fac))
                + cp.sum(cp.multiply(np.array(d.quad), cp.square(y)))
                + cp.sum(cp.multiply(np.array(d.transport), x)))
        prob = cp.Problem(cp.Minimize(cost), cons)
        prob.solve()
        if prob.status in ("optimal", "optimal_inaccurate"):
            best = min(best, float(prob.value))
    return best


def lp_vertex_optimum(c, A, b, lo, hi) -> float:
    """min c.x over {A x <= b, lo <= x <= hi} (bounded) by enumerating all vertices."""
    c, A, b = np.asarray(c, float), np.asarray(A, float).reshape(-1, len(c)), np.asarray(b, float)
    n = len(c)
    H = np.vstack([A, np.eye(n), -np.eye(n)])
    h = np.concatenate([b, hi, -np.asarray(lo, float)])
    combos = np.array(list(itertools.combinations(range(len(H)), n)))
    M = H[combos]
    rhs = h[combos]
    ok = np.abs(np.linalg.det(M)) > 1e-10
    xs = np.linalg.solve(M[ok], rhs[ok][..., None])[..., 0]
    feas = np.all(xs @ H.T <= h + 1e-9, axis=1)
    if not np.any(feas):
        return math.inf
    return float(np.min(xs[feas] @ c))


def example1_optimum(x_upper: float = 0.5) -> float:
    """``min -x + y`` over both indicator values; ``x`` is pushed to its upper bound."""
    best = -x_upper  # z = 0: y = 0, any x in [0, x_upper]

    def on(ys):
        x = np.full_like(ys, x_upper)
        feasible = -ys ** 3 + ys <= x + 1e-12
        return np.where(feasible, -x + ys, np.inf)

    _, val = grid_minimize(on, 0.5, 1.0)
    return min(best, val)
