import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perspcut.cuts import (BILINEAR, PERSPECTIVE, PLAIN, SECANT, AffineEstimator,
                           LinearCut, Mode, SeparationSettings, bilinear_underestimator,
                           cubic_coefficients, cubic_envelope_estimator, estimate, gradient_cut,
                           perspective_cut_direct, perspective_envelope_value, perspective_point,
                           secant_underestimator, separate_constraint, strengthen_perspective)
from perspcut.detect import detect_structures
from perspcut.families import example1
from perspcut.model import Interval, eval_expr, exp, var

y, z, x = var(0), var(1), var(2)


def _coeffs(est, n=3):
    return [est.coeffs.get(j, 0.0) for j in range(n)] + [est.constant]


def test_gradient_cut_examples():
    assert _coeffs(gradient_cut(y ** 2, {0: 1.0})) == pytest.approx([2, 0, 0, -1])
    aff = 3 * y - 2 * x + 1
    assert _coeffs(gradient_cut(aff, {0: 7.0, 2: -3.0})) == pytest.approx([3, 0, -2, 1])
    assert _coeffs(gradient_cut(exp(y), {0: 0.0})) == pytest.approx([1, 0, 0, 1])


def test_gradient_cut_requires_convexity_when_box_given():
    with pytest.raises(ValueError):
        gradient_cut(-y ** 2, {0: 0.5}, box={0: Interval(0, 1)})


def test_secant_examples():
    est = secant_underestimator(-y ** 3 + y, {0: Interval(0.5, 1.0)})
    assert est.coeffs[0] == pytest.approx(-0.75, abs=1e-12)
    assert est.constant == pytest.approx(0.75, abs=1e-12)
    assert est.kind == SECANT
    aff = secant_underestimator(2 * y + 1, {0: Interval(-3, 4)})
    assert _coeffs(aff) == pytest.approx([2, 0, 0, 1])
    assert _coeffs(secant_underestimator(-y ** 2, {0: Interval(0, 1)})) == pytest.approx([-1, 0, 0, 0])


def test_secant_degenerate_box():
    est = secant_underestimator(-y ** 3 + y, {0: Interval(0.5, 0.5)})
    assert not est.coeffs.get(0) and est.constant == pytest.approx(-0.125 + 0.5)


def test_bilinear_envelope_corners():
    box = {0: Interval(0, 1), 2: Interval(0, 1)}
    est = bilinear_underestimator(y * x, box, {0: 0.5, 2: 0.5})
    assert est.kind == BILINEAR
    gaps = [a * b - est.value({0: a, 2: b}) for a, b in itertools.product((0, 1), repeat=2)]
    assert min(gaps) >= -1e-12
    assert sum(abs(g) < 1e-12 for g in gaps) >= 2
    assert est.value({0: 0.5, 2: 0.5}) <= 0.25


def test_bilinear_fixed_factor_is_exact():
    est = bilinear_underestimator(y * x, {0: Interval(0.7, 0.7), 2: Interval(-1, 2)}, {0: 0.7, 2: 1})
    assert est.coeffs.get(2) == pytest.approx(0.7) and abs(est.coeffs.get(0, 0.0)) < 1e-15
    assert est.constant == pytest.approx(0.0, abs=1e-15)


def test_bilinear_validity_sampled(rng):
    for _ in range(20):
        lo = rng.uniform(-2, 1, size=2)
        hi = lo + rng.uniform(0.1, 3, size=2)
        box = {0: Interval(lo[0], hi[0]), 2: Interval(lo[1], hi[1])}
        pt = {0: float(rng.uniform(lo[0], hi[0])), 2: float(rng.uniform(lo[1], hi[1]))}
        under = bilinear_underestimator(y * x, box, pt)
        over = bilinear_underestimator(y * x, box, pt, over=True)
        s = rng.uniform(lo, hi, size=(1000, 2))
        vals = s[:, 0] * s[:, 1]
        u = under.constant + under.coeffs.get(0, 0) * s[:, 0] + under.coeffs.get(2, 0) * s[:, 1]
        o = over.constant + over.coeffs.get(0, 0) * s[:, 0] + over.coeffs.get(2, 0) * s[:, 1]
        assert np.min(vals - u) >= -1e-9 and np.min(o - vals) >= -1e-9


def test_bilinear_infinite_box_rejected():
    with pytest.raises(ValueError):
        bilinear_underestimator(y * x, {0: Interval(0, math.inf), 2: Interval(0, 1)}, {0: 1, 2: 1})


# ---------------------------------------------------------------------------
# strengthening and perspective cuts

def test_strengthen_examples():
    phi = AffineEstimator({0: -0.75}, 0.75, SECANT)
    cut = strengthen_perspective(phi, ({0: 0.0}, 1), 0.0)
    assert _coeffs(cut, 2) == pytest.approx([-0.75, 0.75, 0.0], abs=1e-15)
    tight = AffineEstimator({0: 2.0}, -2.0)  # equals f_off = 0 at y0 = 1
    assert _coeffs(strengthen_perspective(tight, ({0: 1.0}, 1), 0.0), 2) == [2.0, 0.0, -2.0]
    grad = gradient_cut(y ** 2, {0: 1.0})
    assert _coeffs(strengthen_perspective(grad, ({0: 0.0}, 1), 0.0), 2) == pytest.approx([2, -1, 0])


def test_perspective_direct_examples():
    sc = ({0: 0.0}, 1)
    cut = perspective_cut_direct(y ** 2, sc, {0: 0.5, 1: 0.5})
    assert _coeffs(cut, 2) == pytest.approx([2, -1, 0])
    assert perspective_point({0: 0.5}, 0.5, {0: 0.0}) == {0: 1.0}
    with pytest.raises(ValueError):
        perspective_cut_direct(y ** 2, sc, {0: 0.5, 1: 0.0})


def test_perspective_direct_at_z_one_is_gradient_cut():
    f = y ** 2 + exp(0.5 * y)
    sc = ({0: 0.3}, 1)
    cut = perspective_cut_direct(f, sc, {0: 0.8, 1: 1.0})
    grad = gradient_cut(f, {0: 0.8})
    for yy in (-1.0, 0.0, 2.0):
        assert cut.value({0: yy, 1: 1.0}) == pytest.approx(grad.value({0: yy}), abs=1e-12)


def test_perspective_direct_nonzero_off_against_envelope():
    f = y ** 2
    y0 = {0: 1.0}
    pt = (1.5, 0.5)
    cut = perspective_cut_direct(f, (y0, 1), {0: pt[0], 1: pt[1]})
    assert perspective_point({0: 1.5}, 0.5, y0) == {0: 2.0}
    h = 1e-6
    env = lambda a, b: perspective_envelope_value(f, {0: a}, b, y0)
    dy = (env(pt[0] + h, pt[1]) - env(pt[0] - h, pt[1])) / (2 * h)
    dz = (env(pt[0], pt[1] + h) - env(pt[0], pt[1] - h)) / (2 * h)
    assert cut.coeffs[0] == pytest.approx(dy, abs=1e-5)
    assert cut.coeffs[1] == pytest.approx(dz, abs=1e-5)
    assert cut.value({0: pt[0], 1: pt[1]}) == pytest.approx(env(*pt), abs=1e-9)


def test_envelope_examples():
    assert perspective_envelope_value(y ** 2, {0: 0.5}, 0.5, {0: 0.0}) == pytest.approx(0.5)
    assert perspective_envelope_value(y ** 2, {0: 0.7}, 1.0, {0: 0.2}) == pytest.approx(0.49)
    assert perspective_envelope_value(y ** 2, {0: 1.0}, 1.0, {0: 0.0}) == 1.0
    with pytest.raises(ValueError):
        perspective_envelope_value(y ** 2, {0: 1.0}, 0.0, {0: 0.0})


@settings(max_examples=100, deadline=None)
@given(a=st.floats(0.1, 5), b=st.floats(-3, 3), c=st.floats(-2, 2), y0=st.floats(-2, 2),
       yh=st.floats(-3, 3), zh=st.floats(0.05, 0.95))
def test_envelope_support(a, b, c, y0, yh, zh):
    f = a * y ** 2 + b * y + c
    off = {0: y0}
    cut = perspective_cut_direct(f, (off, 1), {0: yh, 1: zh})
    r = np.random.default_rng(abs(hash((a, b, yh))) % 2 ** 32)
    for yy, zz in zip(r.uniform(-4, 4, 50), r.uniform(1e-6, 1, 50)):
        env = perspective_envelope_value(f, {0: yy}, zz, off)
        assert cut.value({0: yy, 1: zz}) <= env + 1e-8 * max(1.0, abs(env))
    at = perspective_envelope_value(f, {0: yh}, zh, off)
    assert cut.value({0: yh, 1: zh}) == pytest.approx(at, abs=1e-6 * max(1.0, abs(at)))


# ---------------------------------------------------------------------------
# cubic envelope

def test_cubic_coefficients_and_envelope_validity(rng):
    f = 0.7 * y ** 3 - 2.0 * y ** 2 + 1.1 * y
    poly = cubic_coefficients(f)
    assert poly[0] == 0 and poly[1] == pytest.approx((0.0, 1.1, -2.0, 0.7))  # ascending powers
    box = {0: Interval(0.4, 2.3)}
    grid = np.linspace(0.4, 2.3, 2001)
    vals = 0.7 * grid ** 3 - 2.0 * grid ** 2 + 1.1 * grid
    for p in rng.uniform(0.4, 2.3, 30):
        for over in (False, True):
            est = cubic_envelope_estimator(poly, box, {0: float(p)}, over)
            line = est.constant + est.coeffs.get(0, 0.0) * grid
            if over:
                assert np.min(line - vals) >= -1e-9
            else:
                assert np.min(vals - line) >= -1e-9


def test_estimate_mixed_sum_is_valid(rng):
    f = -y ** 3 + y ** 2 + y * x + exp(x)
    box = {0: Interval(-1, 1.5), 2: Interval(-0.5, 1)}
    pts = np.column_stack([rng.uniform(-1, 1.5, 2000), rng.uniform(-0.5, 1, 2000)])
    for _ in range(10):
        p = {0: float(rng.uniform(-1, 1.5)), 2: float(rng.uniform(-0.5, 1))}
        est, _ = estimate(f, box, p)
        assert est is not None
        for a, b in pts[::20]:
            assert est.value({0: a, 2: b}) <= eval_expr(f, {0: a, 2: b}) + 1e-9


# ---------------------------------------------------------------------------
# separation

def _example2():
    inst = example1()
    (s,) = detect_structures(inst)
    con = inst.nonlinear_constraints[s.constraint]
    point = [0.0, 0.4, 0.7, 0.0]  # x, y, z, w
    return inst, s, con, point


def test_example2_full_mode_cut():
    inst, s, con, point = _example2()
    cuts = separate_constraint(point, con, [s], SeparationSettings(Mode.FULL), inst.box())
    assert len(cuts) == 1
    cut = cuts[0]
    assert cut.provenance == PERSPECTIVE and cut.indicator == 2
    expect = {0: -1.0, 1: -0.75, 2: 0.75, 3: -1.0}
    for j, k in expect.items():
        assert cut.coeffs.get(j, 0.0) == pytest.approx(k, abs=1e-12)
    assert abs(cut.rhs) < 1e-12
    assert cut.violation(point) == pytest.approx(0.225, abs=1e-9)


def test_example2_off_mode_uses_plain_relaxation():
    inst, s, con, point = _example2()
    # on the global box y in [0, 1] the secant of -y^3 + y is identically zero
    sec = secant_underestimator(s.sc_part, {1: Interval(0.0, 1.0)})
    assert sec.value({1: 0.4}) == pytest.approx(0.0, abs=1e-12)
    assert separate_constraint(point, con, [s], SeparationSettings(Mode.OFF), inst.box()) == []
    # a point that violates the plain relaxation does get a plain cut
    bad = [0.0, 0.4, 0.7, -0.1]
    (cut,) = separate_constraint(bad, con, [s], SeparationSettings(Mode.OFF), inst.box())
    assert cut.provenance == PLAIN and cut.violation(bad) == pytest.approx(0.1, abs=1e-9)


def test_example2_convex_mode_skips_nonconvex_structure():
    inst, s, con, point = _example2()
    assert separate_constraint(point, con, [s], SeparationSettings(Mode.CONVEX), inst.box()) == []


def test_satisfied_point_gives_no_cut():
    inst, s, con, _ = _example2()
    ok = [0.5, 0.6, 1.0, 0.0]
    for mode in Mode:
        assert separate_constraint(ok, con, [s], SeparationSettings(mode), inst.box()) == []


def test_settings_validation():
    with pytest.raises(ValueError):
        SeparationSettings(min_violation=0.0)


def test_cut_key_scaling_invariant():
    a = LinearCut({0: 1.0, 1: -2.0}, 3.0)
    b = LinearCut({0: 2.5, 1: -5.0}, 7.5)
    assert a.key() == b.key()
    assert a.key() != LinearCut({0: 1.0, 1: -2.0}, 3.1).key()
