import itertools
import math

import pytest

from oracles import example1_optimum
from perspcut.bnb import (INFEASIBLE, OPTIMAL, SETTING_NAMES, TIME_LIMIT, BranchAndCut, Node,
                          Settings, branch, most_fractional, propagate_node, settings_for, solve,
                          split_value)
from perspcut.cuts import Mode
from perspcut.detect import find_semicontinuous
from perspcut.families import (cubic_family, example1, facility_location, milp_instance,
                               planted_convex, root_bound_instance)
from perspcut.lp import OPTIMAL as LP_OPTIMAL
from perspcut.model import (BINARY, CONTINUOUS, RawConstraint, Variable, permute_instance,
                            to_extended_form, var)


def _check_incumbent(inst, x, st, gap=1e-4):
    assert x is not None
    assert inst.original_violation(x) <= 1e-6
    assert st.gap <= gap + 1e-12
    assert st.dual <= st.primal + 1e-9


@pytest.mark.parametrize("name", SETTING_NAMES)
def test_example1_matches_enumeration(name):
    inst = example1()
    x, st = solve(inst, settings_for(name))
    assert st.status == OPTIMAL
    assert st.primal == pytest.approx(example1_optimum(), abs=1e-6)
    _check_incumbent(inst, x, st)


def test_fixed_binary_needs_no_branching():
    base = root_bound_instance()
    vs = [Variable(v.id, v.name, v.kind, 1.0 if v.is_binary else v.lower, v.upper,
                   v.objective_coeff) for v in base.variables[: base.n_original]]
    inst = to_extended_form(vs, base.original_constraints)
    x, st = solve(inst, Settings(mode=Mode.CONVEX))
    assert st.status == OPTIMAL and st.nodes == 1
    assert st.primal == pytest.approx(0.45, abs=1e-4)


def test_infeasible_toy():
    base = root_bound_instance()
    vs = [Variable(v.id, v.name, v.kind, v.lower, 0.0 if v.is_binary else v.upper,
                   v.objective_coeff) for v in base.variables[: base.n_original]]
    inst = to_extended_form(vs, base.original_constraints)
    x, st = solve(inst)
    assert x is None and st.status == INFEASIBLE and st.nodes == 0


def test_time_limit_status():
    _, st = solve(facility_location(3), Settings(time_limit=1e-9))
    assert st.status == TIME_LIMIT


def test_branch_on_sole_fractional_binary():
    inst = example1()
    node = Node(0, list(inst.lower), list(inst.upper))
    kids = branch(node, inst, [0.3, 0.5, 0.7, 0.0], itertools.count(1))
    assert [(k.lower[2], k.upper[2]) for k in kids] == [(0.0, 0.0), (1.0, 1.0)]
    assert all(k.depth == 1 for k in kids)


def test_branch_tie_prefers_smaller_index():
    vs = [Variable(0, "z1", BINARY, 0, 1), Variable(1, "z2", BINARY, 0, 1)]
    inst = to_extended_form(vs, [RawConstraint(var(0) + var(1), "<=", 1.0)])
    assert most_fractional(inst, [0.5, 0.5], inst.lower, inst.upper) == 0


def test_spatial_split_is_clipped():
    vs = [Variable(0, "y", CONTINUOUS, 0, 1), Variable(1, "x", CONTINUOUS, 0, 1, 1.0)]
    inst = to_extended_form(vs, [RawConstraint(var(0) ** 2 - var(1), "<=", 0.0)])
    node = Node(0, list(inst.lower), list(inst.upper))
    kids = branch(node, inst, [0.95, 0.0, 0.0], itertools.count(1))
    assert kids[0].upper[0] == pytest.approx(0.8) and kids[1].lower[0] == pytest.approx(0.8)
    assert split_value(0.95, 0.0, 1.0) == pytest.approx(0.8)
    assert split_value(0.5, 0.0, 1.0) == 0.5


def test_propagate_node_collapses_followers():
    inst = example1()
    infos = list(find_semicontinuous(inst).values())
    on = Node(0, [0, 0, 1, -1], [0.5, 1, 1, 0])
    lo, hi = propagate_node(on, inst, infos)
    assert (lo[1], hi[1]) == pytest.approx((0.5, 1.0))
    off = Node(0, [0, 0, 0, -1], [0.5, 1, 0, 0])
    lo, hi = propagate_node(off, inst, infos)
    assert lo[1] == hi[1] == 0.0
    free = Node(0, list(inst.lower), list(inst.upper))
    lo, hi = propagate_node(free, inst, infos)
    assert (lo[2], hi[2]) == (0.0, 1.0) and (lo[1], hi[1]) == (0.0, 1.0)


class _Recorder(BranchAndCut):
    """Checks that each node's first LP bound is no weaker than the inherited one."""

    def process_node(self, node):
        inherited = node.bound
        real = self.lp.solve
        first = []

        def spy(*a, **k):
            r = real(*a, **k)
            if not first:
                first.append(r)
            return r

        self.lp.solve = spy
        try:
            out = super().process_node(node)
        finally:
            del self.lp.solve
        if first and first[0].status == LP_OPTIMAL and math.isfinite(inherited):
            assert first[0].objective >= inherited - 1e-9 * max(1.0, abs(inherited))
            self.checked = getattr(self, "checked", 0) + 1
        return out


@pytest.mark.parametrize("make", [lambda: facility_location(4), lambda: cubic_family(6)])
@pytest.mark.parametrize("name", ["off", "full"])
def test_dual_bound_monotone_along_paths(make, name):
    bc = _Recorder(make(), settings_for(name))
    _, st = bc.solve()
    assert st.status == OPTIMAL
    if st.nodes > 1:
        assert bc.checked >= 1


@pytest.mark.parametrize("seed", range(10))
def test_convex_root_bound_not_worse_than_off(seed):
    inst = facility_location(seed)
    _, off = solve(inst, settings_for("off"))
    _, cvx = solve(inst, settings_for("convex"))
    assert cvx.root_dual >= off.root_dual - 1e-9


@pytest.mark.parametrize("make", [lambda: cubic_family(0), lambda: facility_location(0)])
def test_determinism(make):
    runs = [solve(make(), settings_for("full"))[1] for _ in range(2)]
    a, b = runs
    assert (a.nodes, a.lp_iterations, a.primal, a.dual, a.root_dual) == \
        (b.nodes, b.lp_iterations, b.primal, b.dual, b.root_dual)


def test_settings_equivalent_without_structures():
    inst = milp_instance()
    stats = [solve(inst, settings_for(n))[1] for n in SETTING_NAMES]
    assert stats[0].structures == 0
    assert len({(s.lp_iterations, s.nodes, s.primal) for s in stats}) == 1
    assert stats[0].primal == pytest.approx(-8.0)  # {z0, z2} or {z0, z1} with x = 1


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_permutations_keep_optimum(seed):
    for make in (lambda: cubic_family(seed), lambda: facility_location(seed), planted_convex):
        inst = make()
        _, ref = solve(inst, settings_for("full"))
        _, per = solve(permute_instance(inst, 100 + seed), settings_for("full"))
        assert per.status == ref.status == OPTIMAL
        assert per.primal == pytest.approx(ref.primal, abs=2e-4 * max(1.0, abs(ref.primal)))


def test_settings_validation():
    with pytest.raises(ValueError):
        Settings(gap_limit=-1)
    with pytest.raises(ValueError):
        settings_for("aggressive")
    assert settings_for("full-nobt").label == "full-nobt"
    assert not settings_for("full-nobt").bound_tightening
