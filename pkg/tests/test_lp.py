import math

import numpy as np
import pytest

from oracles import lp_vertex_optimum
from perspcut.cuts import LinearCut
from perspcut.lp import INFEASIBLE, ITERATION_LIMIT, OPTIMAL, UNBOUNDED, LpConfig, LpProblem


def test_single_variable_max():
    lp = LpProblem([-1.0], [0.0], [math.inf])
    lp.add_row(({0: 1.0}, -math.inf, 1.0))
    r = lp.solve()
    assert r.status == OPTIMAL and r.objective == pytest.approx(-1.0) and r.primal[0] == pytest.approx(1)


def test_symmetric_cover():
    lp = LpProblem([1.0, 1.0], [0, 0], [1, 1])
    lp.add_row(({0: 1.0, 1: 1.0}, 1.0, math.inf))
    assert lp.solve().objective == pytest.approx(1.0)


def test_infeasible_rows():
    lp = LpProblem([0.0], [-10], [10])
    lp.add_rows([({0: 1.0}, 2.0, math.inf), ({0: 1.0}, -math.inf, 1.0)])
    assert lp.solve().status == INFEASIBLE


def test_unbounded():
    lp = LpProblem([-1.0, 0.0], [0, 0], [math.inf, math.inf])
    lp.add_row(({0: 1.0, 1: -1.0}, -math.inf, 3.0))
    assert lp.solve().status == UNBOUNDED


def test_iteration_limit_is_a_status():
    rng = np.random.default_rng(3)
    lp = LpProblem(rng.uniform(-1, 1, 8), np.zeros(8), np.ones(8) * 5)
    for _ in range(6):
        lp.add_row((dict(enumerate(rng.uniform(-1, 1, 8))), -math.inf, 1.0))
    r = lp.solve(max_iter=1)
    assert r.status in (ITERATION_LIMIT, OPTIMAL)


def _base():
    lp = LpProblem([-1.0, -2.0], [0, 0], [4, 4])
    lp.add_row(({0: 1.0, 1: 1.0}, -math.inf, 5.0), key="a")
    lp.add_row(({0: -1.0, 1: 2.0}, -math.inf, 4.0), key="b")
    return lp


def test_add_satisfied_and_duplicate_rows():
    lp = _base()
    r0 = lp.solve()
    lp.add_row(({0: 1.0}, -math.inf, 100.0), key="loose")
    lp.add_row(({0: 1.0, 1: 1.0}, -math.inf, 5.0), key="dup")
    r1 = lp.solve(warm=r0.basis)
    assert r1.objective == pytest.approx(r0.objective)
    assert np.allclose(r1.primal, r0.primal)


def test_add_violated_row_weakly_worsens():
    lp = _base()
    r0 = lp.solve()
    cut = LinearCut({1: 1.0}, 1.0)
    assert cut.violation(r0.primal) > 0
    lp.add_row(cut, key="cut")
    r1 = lp.solve(warm=r0.basis)
    assert r1.objective >= r0.objective - 1e-12
    assert r1.primal[1] <= 1.0 + 1e-9


def test_duplicate_key_rejected():
    lp = _base()
    with pytest.raises(ValueError):
        lp.add_row(({0: 1.0}, 0.0, 1.0), key="a")
    with pytest.raises(ValueError):
        lp.add_row(({7: 1.0}, 0.0, 1.0))


def test_bound_changes():
    lp = _base()
    r0 = lp.solve()
    lp.change_bounds(0, 0.0, 4.0)  # unchanged bound, nonbasic at its value
    assert lp.solve(warm=r0.basis).objective == pytest.approx(r0.objective)
    lp.change_bounds(1, 1.0, 1.0)
    assert lp.lower[1] == lp.upper[1] == 1.0
    r1 = lp.solve(warm=r0.basis)
    assert r1.primal[1] == pytest.approx(1.0)
    lp.change_bounds(1, 0.0, 4.0)
    assert lp.solve(warm=r1.basis).objective == pytest.approx(r0.objective)
    with pytest.raises(ValueError):
        lp.change_bounds(0, 2.0, 1.0)


def test_remove_rows_and_copy():
    lp = _base()
    cp = lp.copy()
    lp.remove_rows(["b"])
    assert cp.m == 2 and lp.m == 1
    assert cp.solve().objective != pytest.approx(lp.solve().objective)


def _random_lp(rng, n, m):
    A = rng.uniform(-1, 1, size=(m, n))
    x0 = rng.uniform(0, 1, size=n)
    # roughly half the instances have an interior point
    slack = rng.uniform(-0.3, 0.7, size=m)
    b = A @ x0 + slack
    c = rng.uniform(-1, 1, size=n)
    lo, hi = -rng.uniform(0, 2, size=n), rng.uniform(0.5, 2, size=n)
    return c, A, b, lo, hi


def test_against_vertex_enumeration(rng):
    counts = {OPTIMAL: 0, INFEASIBLE: 0}
    for _ in range(200):
        n, m = int(rng.integers(1, 7)), int(rng.integers(1, 9))
        c, A, b, lo, hi = _random_lp(rng, n, m)
        lp = LpProblem(c, lo, hi)
        for i in range(m):
            lp.add_row((dict(enumerate(A[i])), -math.inf, b[i]))
        r = lp.solve()
        ref = lp_vertex_optimum(c, A, b, lo, hi)
        if math.isinf(ref):
            assert r.status == INFEASIBLE
        else:
            assert r.status == OPTIMAL
            assert r.objective == pytest.approx(ref, abs=1e-7)
            assert np.all(A @ r.primal <= b + 1e-7)
            assert np.all(r.primal >= lo - 1e-7) and np.all(r.primal <= hi + 1e-7)
            basic = [j for (kind, j), s in r.basis.items() if kind == "c" and s == "B"]
            assert np.all(np.abs(r.reduced_costs[basic]) <= 1e-8)
        counts[r.status] += 1
    assert counts[OPTIMAL] > 50 and counts[INFEASIBLE] > 0


def test_adding_rows_is_monotone(rng):
    for _ in range(50):
        n = int(rng.integers(2, 7))
        c, A, b, lo, hi = _random_lp(rng, n, 3)
        lp = LpProblem(c, lo, hi)
        for i in range(3):
            lp.add_row((dict(enumerate(A[i])), -math.inf, b[i] + 1.0))
        r = lp.solve()
        for _ in range(4):
            row = rng.uniform(-1, 1, size=n)
            lp.add_row((dict(enumerate(row)), -math.inf, float(row @ r.primal) - 0.1))
            r2 = lp.solve(warm=r.basis)
            if r2.status != OPTIMAL:
                assert r2.status == INFEASIBLE
                break
            assert r2.objective >= r.objective - 1e-8
            r = r2


def test_warm_start_resolve_is_free():
    lp = _base()
    r0 = lp.solve()
    r1 = lp.solve(warm=r0.basis)
    assert r1.iterations == 0 and r1.objective == pytest.approx(r0.objective)


def test_config_is_shared():
    cfg = LpConfig(feas_tol=1e-6)
    lp = LpProblem([1.0], [0], [1], cfg)
    assert lp.copy().config is cfg
