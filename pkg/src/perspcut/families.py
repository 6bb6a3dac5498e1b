"""Seeded instance generators used by the corpus, the tests and the benchmarks."""

from __future__ import annotations

import os
import random
from dataclasses import dataclass
from typing import Dict, List, Tuple

from .model.expr import Var, exp
from .model.instance import BINARY, CONTINUOUS, Instance, RawConstraint, Variable, \
    to_extended_form


def _v(vs: List[Variable], name: str, kind=CONTINUOUS, lo=0.0, hi=1.0, obj=0.0) -> Var:
    vs.append(Variable(len(vs), name, kind, lo, hi, obj))
    return Var(len(vs) - 1)


def example1(x_upper: float = 0.5) -> Instance:
    """``min -x + y  s.t.  -y^3 + y - x <= 0,  0.5 z <= y <= z``."""
    vs: List[Variable] = []
    x = _v(vs, "x", hi=x_upper, obj=-1.0)
    y = _v(vs, "y", obj=1.0)
    z = _v(vs, "z", BINARY)
    raw = [RawConstraint(-y ** 3 + y - x, "<=", 0.0, name="cubic"),
           RawConstraint(0.5 * z - y, "<=", 0.0, name="on_lower"),
           RawConstraint(y - z, "<=", 0.0, name="on_upper")]
    return to_extended_form(vs, raw, name="example1")


def example1_tightenable() -> Instance:
    """:func:`example1` plus ``y <= 0.8 + 10 (1 - z)``: fixing z = 1 shrinks the on-range of y."""
    base = example1()
    vs = list(base.variables[: base.n_original])
    y, z = Var(1), Var(2)
    raw = list(base.original_constraints) + [
        RawConstraint(y + 10.0 * z, "<=", 10.8, name="big_m")]
    return to_extended_form(vs, raw, name="example1_bt")


def root_bound_instance() -> Instance:
    """``min x + 0.2 z  s.t.  x >= y^2,  0.5 z <= y <= z,  y >= 0.3``."""
    vs: List[Variable] = []
    x = _v(vs, "x", hi=10.0, obj=1.0)
    y = _v(vs, "y", lo=0.3)
    z = _v(vs, "z", BINARY, obj=0.2)
    raw = [RawConstraint(y ** 2 - x, "<=", 0.0, name="square"),
           RawConstraint(0.5 * z - y, "<=", 0.0, name="on_lower"),
           RawConstraint(y - z, "<=", 0.0, name="on_upper")]
    return to_extended_form(vs, raw, name="root_bound")


@dataclass(frozen=True)
class FacilityData:
    fixed: Tuple[float, ...]
    quad: Tuple[float, ...]
    cap_lo: Tuple[float, ...]
    cap_hi: Tuple[float, ...]
    demand: Tuple[float, ...]
    transport: Tuple[Tuple[float, ...], ...]


def facility_data(seed: int, n_fac: int = 3, n_cust: int = 4) -> FacilityData:
    rng = random.Random(seed)
    demand = tuple(round(rng.uniform(1.0, 3.0), 3) for _ in range(n_cust))
    total = sum(demand)
    cap_hi = tuple(round(rng.uniform(0.55, 0.9) * total, 3) for _ in range(n_fac))
    cap_lo = tuple(round(rng.uniform(0.15, 0.35) * h, 3) for h in cap_hi)
    return FacilityData(
        fixed=tuple(round(rng.uniform(2.0, 6.0), 3) for _ in range(n_fac)),
        quad=tuple(round(rng.uniform(0.3, 1.2), 3) for _ in range(n_fac)),
        cap_lo=cap_lo, cap_hi=cap_hi, demand=demand,
        transport=tuple(tuple(round(rng.uniform(0.1, 1.0), 3) for _ in range(n_cust))
                        for _ in range(n_fac)))


def facility_location(seed: int, n_fac: int = 3, n_cust: int = 4) -> Instance:
    """Convex facility location: open cost, quadratic production cost, semi-continuous output.

    Facility ``i`` produces ``y_i`` in ``{0} U [lo_i, hi_i]`` (``lo_i z_i <= y_i <= hi_i z_i``)
    at cost ``f_i z_i + q_i y_i^2`` and ships ``x_ij`` to customer ``j``.
    """
    d = facility_data(seed, n_fac, n_cust)
    vs: List[Variable] = []
    z = [_v(vs, f"z{i}", BINARY, obj=d.fixed[i]) for i in range(n_fac)]
    y = [_v(vs, f"y{i}", hi=d.cap_hi[i]) for i in range(n_fac)]
    s = [_v(vs, f"s{i}", hi=d.quad[i] * d.cap_hi[i] ** 2 + 1.0, obj=1.0) for i in range(n_fac)]
    x = [[_v(vs, f"x{i}_{j}", hi=d.demand[j], obj=d.transport[i][j]) for j in range(n_cust)]
         for i in range(n_fac)]
    raw: List[RawConstraint] = []
    for i in range(n_fac):
        raw.append(RawConstraint(d.quad[i] * y[i] ** 2 - s[i], "<=", 0.0, name=f"cost{i}"))
        raw.append(RawConstraint(d.cap_lo[i] * z[i] - y[i], "<=", 0.0, name=f"lo{i}"))
        raw.append(RawConstraint(y[i] - d.cap_hi[i] * z[i], "<=", 0.0, name=f"hi{i}"))
        raw.append(RawConstraint(sum((x[i][j] for j in range(n_cust)), 0.0) - y[i], "=", 0.0,
                                 name=f"out{i}"))
    for j in range(n_cust):
        raw.append(RawConstraint(sum((x[i][j] for i in range(n_fac)), 0.0), "=", d.demand[j],
                                 name=f"dem{j}"))
    return to_extended_form(vs, raw, name=f"facility_{seed}")


@dataclass(frozen=True)
class CubicData:
    a: Tuple[float, ...]
    b: Tuple[float, ...]
    e: Tuple[float, ...]
    revenue: Tuple[float, ...]
    fixed: Tuple[float, ...]
    lo: Tuple[float, ...]
    hi: Tuple[float, ...]
    min_on: int


def cubic_data(seed: int, n: int = 4) -> CubicData:
    rng = random.Random(10_000 + seed)
    hi = tuple(round(rng.uniform(1.5, 2.5), 3) for _ in range(n))
    return CubicData(
        a=tuple(round(rng.uniform(0.5, 1.0), 3) for _ in range(n)),
        b=tuple(round(rng.uniform(1.5, 2.5), 3) for _ in range(n)),
        e=tuple(round(rng.uniform(0.5, 1.5), 3) for _ in range(n)),
        revenue=tuple(round(rng.uniform(0.5, 1.5), 3) for _ in range(n)),
        fixed=tuple(round(rng.uniform(0.1, 0.6), 3) for _ in range(n)),
        lo=tuple(round(rng.uniform(0.3, 0.7), 3) for _ in range(n)),
        hi=hi, min_on=rng.randint(1, 2))


def cubic_family(seed: int, n: int = 4) -> Instance:
    """Units with nonconvex cubic cost ``a y^3 - b y^2 + e y`` on a semi-continuous output.

    Maximizes revenue minus cost with at least ``min_on`` units switched on.
    """
    d = cubic_data(seed, n)
    vs: List[Variable] = []
    z = [_v(vs, f"z{i}", BINARY, obj=d.fixed[i]) for i in range(n)]
    y = [_v(vs, f"y{i}", hi=d.hi[i], obj=-d.revenue[i]) for i in range(n)]
    t = [_v(vs, f"t{i}", lo=-10.0, hi=20.0, obj=1.0) for i in range(n)]
    raw: List[RawConstraint] = []
    for i in range(n):
        cost = d.a[i] * y[i] ** 3 - d.b[i] * y[i] ** 2 + d.e[i] * y[i]
        raw.append(RawConstraint(cost - t[i], "<=", 0.0, name=f"cost{i}"))
        raw.append(RawConstraint(d.lo[i] * z[i] - y[i], "<=", 0.0, name=f"lo{i}"))
        raw.append(RawConstraint(y[i] - d.hi[i] * z[i], "<=", 0.0, name=f"hi{i}"))
    raw.append(RawConstraint(sum(z, 0.0), ">=", float(d.min_on), name="cardinality"))
    return to_extended_form(vs, raw, name=f"cubic_{seed}")


@dataclass(frozen=True)
class PlantedStructure:
    """Expected detection result: ``(constraint name, var name, off value, on range)``."""

    constraint: str
    var: str
    off: float
    on: Tuple[float, float]


def planted_detection(seed: int, k: int) -> Tuple[Instance, List[PlantedStructure]]:
    """Instance with exactly ``k`` perspective structures behind random linear links.

    For ``k >= 2`` the last two structures form a lifting case: ``u = y^2``
    defines ``u``, which then appears in ``exp(u) - x <= c``.
    """
    if k < 1:
        raise ValueError("k must be positive")
    rng = random.Random(seed)
    vs: List[Variable] = []
    raw: List[RawConstraint] = []
    planted: List[PlantedStructure] = []
    simple = k - 2 if k >= 2 else k
    n_units = simple + (1 if k >= 2 else 0)
    for u in range(n_units):
        beta = rng.choice([0.0, round(rng.uniform(-1.0, 1.0), 3)])
        a_lo = round(rng.uniform(0.2, 1.0), 3)
        a_hi = round(a_lo + rng.uniform(0.5, 2.0), 3)
        if rng.random() < 0.5:
            # negative direction: on-range below the off value
            a_lo, a_hi = -a_hi, -a_lo
        on = (a_lo + beta, a_hi + beta)
        z = _v(vs, f"z{u}", BINARY, obj=round(rng.uniform(0.5, 2.0), 3))
        y = _v(vs, f"y{u}", lo=-5.0, hi=5.0)
        x = _v(vs, f"x{u}", lo=-50.0, hi=200.0, obj=1.0)
        # y <= a_hi z + beta  and  y >= a_lo z + beta, written with random scaling
        s1, s2 = round(rng.uniform(0.5, 3.0), 3), round(rng.uniform(0.5, 3.0), 3)
        raw.append(RawConstraint(s1 * y - s1 * a_hi * z, "<=", s1 * beta, name=f"up{u}"))
        raw.append(RawConstraint(-s2 * y + s2 * a_lo * z, "<=", -s2 * beta, name=f"dn{u}"))
        yname = f"y{u}"
        if u < simple:
            q = round(rng.uniform(0.5, 2.0), 3)
            if rng.random() < 0.5:
                body = q * y ** 2 - x
            else:
                body = q * y ** 2 - 0.5 * y ** 3 - x
            raw.append(RawConstraint(body, "<=", 0.0, name=f"nl{u}"))
            planted.append(PlantedStructure(f"nl{u}", yname, beta, on))
        else:
            w = _v(vs, f"u{u}", lo=-100.0, hi=100.0)
            raw.append(RawConstraint(y ** 2, "=", 0.0, defines=w.id, name=f"def{u}"))
            raw.append(RawConstraint(exp(w) - x, "<=", 1.0, name=f"lift{u}"))
            planted.append(PlantedStructure(f"def{u}", yname, beta, on))
            lo_sq = 0.0 if on[0] <= 0.0 <= on[1] else min(on[0] ** 2, on[1] ** 2)
            planted.append(PlantedStructure(f"lift{u}", f"u{u}", beta ** 2,
                                            (lo_sq, max(on[0] ** 2, on[1] ** 2))))
    return to_extended_form(vs, raw, name=f"planted_{seed}_{k}"), planted


def convex_corpus(n: int = 10) -> List[Instance]:
    return [facility_location(s) for s in range(n)]


def cubic_corpus(n: int = 10) -> List[Instance]:
    return [cubic_family(s) for s in range(n)]


def milp_instance() -> Instance:
    """Tiny knapsack without nonlinear rows."""
    vs: List[Variable] = []
    z = [_v(vs, f"z{i}", BINARY, obj=-c) for i, c in enumerate((3.0, 4.0, 5.0))]
    x = _v(vs, "x", hi=2.0, obj=-1.0)
    raw = [RawConstraint(2.0 * z[0] + 3.0 * z[1] + 4.0 * z[2] + x, "<=", 6.0, name="cap")]
    return to_extended_form(vs, raw, name="milp")


def planted_convex(seed: int = 0) -> Instance:
    """Single quadratic structure: ``q y^2 <= x`` with ``y`` in ``{0} U [lo, hi]``."""
    rng = random.Random(seed)
    lo = round(rng.uniform(0.2, 0.6), 3)
    hi = round(lo + rng.uniform(0.5, 1.5), 3)
    vs: List[Variable] = []
    z = _v(vs, "z", BINARY, obj=round(rng.uniform(0.5, 1.5), 3))
    y = _v(vs, "y", hi=5.0, obj=-round(rng.uniform(1.0, 3.0), 3))
    x = _v(vs, "x", hi=50.0, obj=1.0)
    raw = [RawConstraint(round(rng.uniform(0.5, 2.0), 3) * y ** 2 - x, "<=", 0.0, name="quad"),
           RawConstraint(lo * z - y, "<=", 0.0, name="on_lower"),
           RawConstraint(y - hi * z, "<=", 0.0, name="on_upper")]
    return to_extended_form(vs, raw, name=f"planted_convex_{seed}")


def corpus() -> Dict[str, Instance]:
    """File name (without extension) to instance, for everything shipped in ``corpus/``."""
    out: Dict[str, Instance] = {
        "example1": example1(),
        "example2": example1(),
        "example1_bt": example1_tightenable(),
        "root_bound": root_bound_instance(),
        "milp": milp_instance(),
        "planted_convex": planted_convex(),
    }
    for s in range(10):
        out[f"facility_{s}"] = facility_location(s)
        out[f"cubic_{s}"] = cubic_family(s)
    return out


def write_corpus(directory: str) -> List[str]:
    from .fileformat import format_instance

    os.makedirs(directory, exist_ok=True)
    paths = []
    for name, inst in corpus().items():
        path = os.path.join(directory, name + ".txt")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(format_instance(inst))
        paths.append(path)
    return paths
