"""Linear estimators, perspective strengthening and constraint separation.

Estimators are affine functions ``phi(v) = constant + sum(coeffs[j] * v_j)``
that under- (or over-) estimate an expression on a box. A valid estimator of
the semi-continuous part on the "on" box is turned into one that is also
exact at the "off" point by adding ``(f(y0) - phi(y0)) * (1 - z)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

from .detect import ScStructure
from .model.curvature import Curvature, curvature
from .model.expr import (Expr, ExpressionDomainError, Pow, Product, Var, decompose, eval_expr,
                         gradient, variables)
from .model.instance import EQ, GE, LE, NonlinearConstraint
from .model.interval import Interval, as_interval, interval_eval

GRADIENT, SECANT, BILINEAR, INTERVAL, MIXED = "gradient", "secant", "bilinear", "interval", "mixed"
PLAIN, PERSPECTIVE = "plain", "perspective"

MIN_Z = 1e-6
MAX_COEF = 1e9
TINY_COEF = 1e-12


class Mode(str, enum.Enum):
    OFF = "off"
    CONVEX = "convex"
    FULL = "full"


@dataclass(frozen=True)
class SeparationSettings:
    mode: Mode = Mode.FULL
    bound_tightening: bool = True
    max_cuts_per_round: int = 2
    min_violation: float = 1e-5
    feas_tol: float = 1e-6

    def __post_init__(self):
        if self.min_violation <= 0:
            raise ValueError("min_violation must be positive")


@dataclass(frozen=True)
class AffineEstimator:
    coeffs: Dict[int, float]
    constant: float
    kind: str = GRADIENT

    def value(self, point) -> float:
        return self.constant + sum(k * point[j] for j, k in self.coeffs.items())

    def __add__(self, other: "AffineEstimator") -> "AffineEstimator":
        coeffs = dict(self.coeffs)
        for j, k in other.coeffs.items():
            coeffs[j] = coeffs.get(j, 0.0) + k
        kind = self.kind if self.kind == other.kind else MIXED
        return AffineEstimator(coeffs, self.constant + other.constant, kind)

    def scaled(self, s: float) -> "AffineEstimator":
        return AffineEstimator({j: s * k for j, k in self.coeffs.items()}, s * self.constant,
                               self.kind)


@dataclass(frozen=True)
class LinearCut:
    """``sum(coeffs[j] * v_j) <= rhs``."""

    coeffs: Dict[int, float]
    rhs: float
    provenance: str = PLAIN
    kind: str = GRADIENT
    local: bool = False
    constraint: int = -1
    indicator: Optional[int] = None

    def activity(self, point) -> float:
        return sum(k * point[j] for j, k in self.coeffs.items())

    def violation(self, point) -> float:
        return self.activity(point) - self.rhs

    def key(self) -> Tuple:
        """Identity up to positive scaling, for deduplication."""
        s = max([abs(k) for k in self.coeffs.values()] + [abs(self.rhs), 1e-300])
        items = tuple(sorted((j, round(k / s, 9)) for j, k in self.coeffs.items()
                             if round(k / s, 9) != 0.0))
        return items, round(self.rhs / s, 9)


# ---------------------------------------------------------------------------
# elementary estimators
# ---------------------------------------------------------------------------

def _box_get(box, j: int) -> Interval:
    return as_interval(box[j])


def gradient_cut(f: Expr, point, box=None) -> AffineEstimator:
    """Tangent ``f(p) + <grad f(p), v - p>``; an underestimator when ``f`` is convex."""
    if box is not None and not curvature(f, box).is_convex:
        raise ValueError("gradient_cut requires a convex function on the box")
    fv = eval_expr(f, point)
    g = gradient(f, point)
    const = fv - sum(k * point[j] for j, k in g.items())
    return AffineEstimator({j: k for j, k in g.items() if k != 0.0}, const, GRADIENT)


def _univariate_var(f: Expr) -> int:
    vs = variables(f)
    if len(vs) != 1:
        raise ValueError(f"expected a univariate expression, got variables {vs}")
    return vs[0]


def secant_underestimator(f: Expr, box) -> AffineEstimator:
    """Chord of a univariate ``f`` between the box endpoints.

    Underestimates a concave ``f`` (and overestimates a convex one) on the box.
    """
    j = _univariate_var(f)
    b = _box_get(box, j)
    if not b.is_finite:
        raise ValueError("secant requires a finite box")
    lo, hi = b.lo, b.hi
    flo = eval_expr(f, {j: lo})
    if hi - lo <= 0.0:
        return AffineEstimator({}, flo, SECANT)
    fhi = eval_expr(f, {j: hi})
    slope = (fhi - flo) / (hi - lo)
    return AffineEstimator({j: slope} if slope != 0.0 else {}, flo - slope * lo, SECANT)


def bilinear_underestimator(product: Expr, box, point, over: bool = False) -> AffineEstimator:
    """McCormick plane for ``x*y`` that is tighter at ``point``."""
    if not (isinstance(product, Product) and len(product.children) == 2
            and all(isinstance(c, Var) for c in product.children)):
        raise ValueError("bilinear estimator needs a product of two variables")
    i, j = product.children[0].id, product.children[1].id
    bi, bj = _box_get(box, i), _box_get(box, j)
    if not (bi.is_finite and bj.is_finite):
        raise ValueError("bilinear estimator requires a finite box")
    if bi.lo == bi.hi:
        return AffineEstimator({j: bi.lo} if bi.lo else {}, 0.0, BILINEAR)
    if bj.lo == bj.hi:
        return AffineEstimator({i: bj.lo} if bj.lo else {}, 0.0, BILINEAR)
    if not over:
        planes = [(bi.lo, bj.lo), (bi.hi, bj.hi)]
    else:
        planes = [(bi.hi, bj.lo), (bi.lo, bj.hi)]
    best = None
    for xi, xj in planes:
        # x*y >= (or <=) xi*y + xj*x - xi*xj
        est = AffineEstimator({i: xj, j: xi}, -xi * xj, BILINEAR)
        val = est.value(point)
        if best is None or (val > best[0] if not over else val < best[0]):
            best = (val, est)
    return best[1]


def _clip(point, box, vs) -> Dict[int, float]:
    out = {}
    for j in vs:
        b = _box_get(box, j)
        out[j] = min(max(float(point[j]), b.lo), b.hi)
    return out


def _tangent_ok(curv: Curvature, over: bool) -> bool:
    return curv.is_concave if over else curv.is_convex


def _safe_tangent(f: Expr, point) -> Optional[AffineEstimator]:
    try:
        est = gradient_cut(f, point)
    except (ExpressionDomainError, OverflowError, ZeroDivisionError):
        return None
    if not all(math.isfinite(k) for k in est.coeffs.values()) or not math.isfinite(est.constant):
        return None
    return est


def _interval_estimator(f: Expr, box, over: bool) -> Optional[AffineEstimator]:
    try:
        r = interval_eval(f, box)
    except ExpressionDomainError:
        return None
    v = r.hi if over else r.lo
    return AffineEstimator({}, v, INTERVAL) if math.isfinite(v) else None


def _term_estimator(f: Expr, box, point, over: bool, global_box=None
                    ) -> Tuple[Optional[AffineEstimator], bool]:
    """Estimator of one nonlinear term; second value tells whether it depends on the box."""
    vs = variables(f)
    curv = curvature(f, box)
    if _tangent_ok(curv, over):
        est = _safe_tangent(f, _clip(point, box, vs))
        if est is not None:
            dep = global_box is None or not _tangent_ok(curvature(f, global_box), over)
            return est, dep
    if len(vs) == 1 and _tangent_ok(curv.negate(), over) and _box_get(box, vs[0]).is_finite:
        est = secant_underestimator(f, box)
        return (est, True) if all(math.isfinite(k) for k in est.coeffs.values()) else (None, True)
    if (isinstance(f, Product) and len(f.children) == 2
            and all(isinstance(c, Var) for c in f.children)
            and all(_box_get(box, j).is_finite for j in vs)):
        return bilinear_underestimator(f, box, point, over=over), True
    return _interval_estimator(f, box, over), True


def estimate(f: Expr, box, point, over: bool = False, global_box=None
             ) -> Tuple[Optional[AffineEstimator], bool]:
    """Under- (``over=False``) or overestimator of ``f`` valid on ``box``.

    Whole-expression tangents and secants are tried first, then a term-wise
    combination. Returns ``(None, True)`` when no finite estimator exists.
    """
    vs = variables(f)
    curv = curvature(f, box)
    if _tangent_ok(curv, over):
        est = _safe_tangent(f, _clip(point, box, vs))
        if est is not None:
            dep = global_box is None or not _tangent_ok(curvature(f, global_box), over)
            return est, dep
    if len(vs) == 1 and _tangent_ok(curv.negate(), over) and _box_get(box, vs[0]).is_finite:
        return secant_underestimator(f, box), True
    poly = cubic_coefficients(f)
    if poly is not None and _box_get(box, poly[0]).is_finite:
        return cubic_envelope_estimator(poly, box, point, over), True
    k0, lin, terms = decompose(f)
    lin = dict(lin)
    terms, cubics = _split_cubics(terms, lin, box)
    total = AffineEstimator(lin, k0, MIXED)
    dep = bool(cubics)
    kinds = set()
    for poly in cubics:
        est = cubic_envelope_estimator(poly, box, point, over)
        total = total + est
        kinds.add(est.kind)
    for coef, term in terms:
        est, d = _term_estimator(term, box, point, over ^ (coef < 0), global_box)
        if est is None:
            return None, True
        total = total + est.scaled(coef)
        dep = dep or d
        kinds.add(_term_kind(term, box, over ^ (coef < 0)))
    kind = kinds.pop() if len(kinds) == 1 else MIXED
    return AffineEstimator(total.coeffs, total.constant, kind), dep


def _split_cubics(terms, lin: Dict[int, float], box):
    """Pull single-variable cubic groups out of a term list (their linear part leaves ``lin``)."""
    groups: Dict[int, List[float]] = {}
    for k, t in terms:
        if isinstance(t, Pow) and isinstance(t.child, Var) and t.exponent in (2, 3):
            groups.setdefault(t.child.id, [0.0, 0.0, 0.0, 0.0])[t.exponent] += k
    chosen = {j for j, g in groups.items() if g[3] != 0.0 and _box_get(box, j).is_finite}
    rest = [(k, t) for k, t in terms
            if not (isinstance(t, Pow) and isinstance(t.child, Var) and t.child.id in chosen)]
    polys = []
    for j in sorted(chosen):
        g = groups[j]
        g[1] = lin.pop(j, 0.0)
        polys.append((j, tuple(g)))
    return rest, polys


def cubic_coefficients(f: Expr) -> Optional[Tuple[int, Tuple[float, float, float, float]]]:
    """``(var, (d, c, b, a))`` when ``f = a v^3 + b v^2 + c v + d`` in a single variable."""
    vs = variables(f)
    if len(vs) != 1:
        return None
    j = vs[0]
    k0, lin, terms = decompose(f)
    coef = [k0, lin.get(j, 0.0), 0.0, 0.0]
    for k, t in terms:
        if not (isinstance(t, Pow) and isinstance(t.child, Var) and t.exponent in (2, 3)):
            return None
        coef[t.exponent] += k
    if coef[3] == 0.0:
        return None
    return j, tuple(coef)


def cubic_envelope_estimator(poly, box, point, over: bool = False) -> AffineEstimator:
    """Support line at ``point`` of the convex (``over``: concave) envelope of a cubic on ``box``.

    A cubic has one inflection, so its envelope is the function itself on the
    convex side and a line through the far endpoint, tangent to the convex
    side, elsewhere. For ``p(v) = a v^3 + b v^2 + ...`` with ``a > 0`` the line
    from ``lo`` touches at ``t = -(b/a + lo)/2``.
    """
    j, (d, c, b, a) = poly
    if over:
        est = cubic_envelope_estimator((j, (-d, -c, -b, -a)), box, point, False)
        return est.scaled(-1.0)
    bj = _box_get(box, j)
    lo, hi = bj.lo, bj.hi
    p = min(max(float(point[j]), lo), hi)
    f = lambda v: ((a * v + b) * v + c) * v + d
    df = lambda v: (3.0 * a * v + 2.0 * b) * v + c

    def line(x0, slope, kind):
        return AffineEstimator({j: slope} if slope else {}, f(x0) - slope * x0, kind)

    def tangent(x0):
        return line(x0, df(x0), GRADIENT)

    if hi - lo <= 0.0:
        return AffineEstimator({}, f(lo), SECANT)
    secant = line(lo, (f(hi) - f(lo)) / (hi - lo), SECANT)
    s = -b / (3.0 * a)
    if a > 0:
        if s >= hi:
            return secant
        if s <= lo:
            return tangent(p)
        t = -(b / a + lo) / 2.0
        if t >= hi:
            return secant
        return line(lo, df(t), SECANT) if p <= t else tangent(p)
    if s <= lo:
        return secant
    if s >= hi:
        return tangent(p)
    t = -(b / a + hi) / 2.0
    if t <= lo:
        return secant
    return line(hi, df(t), SECANT) if p >= t else tangent(p)


def _term_kind(f: Expr, box, over: bool) -> str:
    curv = curvature(f, box)
    if _tangent_ok(curv, over):
        return GRADIENT
    if len(variables(f)) == 1:
        return SECANT
    if isinstance(f, Product):
        return BILINEAR
    return INTERVAL


# ---------------------------------------------------------------------------
# perspective machinery
# ---------------------------------------------------------------------------

def _off_and_indicator(sc) -> Tuple[Dict[int, float], int]:
    if isinstance(sc, ScStructure):
        return sc.off_point, sc.indicator
    off, z = sc
    return dict(off), z


def strengthen_perspective(phi: AffineEstimator, sc, f_off: float) -> AffineEstimator:
    """``phi(y) + (f_off - phi(y0)) * (1 - z)``: valid on the off point as well as the on set.

    ``sc`` is an :class:`ScStructure` or a pair ``(off point, indicator id)``.
    """
    off, z = _off_and_indicator(sc)
    alpha = f_off - phi.value(off)
    coeffs = dict(phi.coeffs)
    coeffs[z] = coeffs.get(z, 0.0) - alpha
    if coeffs[z] == 0.0:
        del coeffs[z]
    return AffineEstimator(coeffs, phi.constant + alpha, phi.kind)


def perspective_point(y_hat: Mapping[int, float], z_hat: float, off: Mapping[int, float]
                      ) -> Dict[int, float]:
    """``y* = (y_hat - y0) / z_hat + y0``."""
    if z_hat <= 0.0:
        raise ValueError("perspective point needs z_hat > 0")
    return {j: (y_hat[j] - y0) / z_hat + y0 for j, y0 in off.items()}


def perspective_cut_direct(f: Expr, sc, point) -> AffineEstimator:
    """Classic perspective cut of a convex ``f`` at ``(y_hat, z_hat)`` written in closed form."""
    off, z = _off_and_indicator(sc)
    z_hat = float(point[z])
    if z_hat <= 0.0:
        raise ValueError("perspective cut requires z_hat in (0, 1]")
    y_star = perspective_point(point, z_hat, off)
    g = gradient(f, y_star)
    f_star = eval_expr(f, y_star)
    f0 = eval_expr(f, off)
    coeffs = {j: k for j, k in g.items() if k != 0.0}
    zc = f_star - f0 - sum(g.get(j, 0.0) * (y_star[j] - off[j]) for j in off)
    const = f0 - sum(g.get(j, 0.0) * off[j] for j in off)
    if zc != 0.0:
        coeffs[z] = coeffs.get(z, 0.0) + zc
    return AffineEstimator(coeffs, const, GRADIENT)


def perspective_envelope_value(f: Expr, y: Mapping[int, float], z: float,
                               y0: Mapping[int, float]) -> float:
    """``z * f(y0 + (y - y0) / z) + (1 - z) * f(y0)`` for ``z`` in (0, 1]."""
    if z <= 0.0:
        raise ValueError("envelope defined for z in (0, 1]")
    inner = {j: y0[j] + (y[j] - y0[j]) / z for j in y0}
    return z * eval_expr(f, inner) + (1.0 - z) * eval_expr(f, y0)


# ---------------------------------------------------------------------------
# separation
# ---------------------------------------------------------------------------

Prober = Callable[[int], Optional[Sequence]]


def _make_cut(est: AffineEstimator, con: NonlinearConstraint, over: bool, box,
              provenance: str, local: bool, index: int, indicator=None) -> Optional[LinearCut]:
    # under: est(v) - w <= 0 ; over: w - est(v) <= 0
    s = -1.0 if over else 1.0
    coeffs = {j: s * k for j, k in est.coeffs.items()}
    w = con.aux_var
    coeffs[w] = coeffs.get(w, 0.0) - s
    rhs = -s * est.constant
    cleaned: Dict[int, float] = {}
    for j, k in coeffs.items():
        if not math.isfinite(k) or abs(k) > MAX_COEF:
            return None
        if abs(k) < TINY_COEF:
            b = _box_get(box, j)
            shift = min(k * b.lo if b.lo > -math.inf else -math.inf,
                        k * b.hi if b.hi < math.inf else -math.inf) if k else 0.0
            if math.isfinite(shift):
                rhs -= shift
                continue
        cleaned[j] = k
    if not math.isfinite(rhs):
        return None
    return LinearCut(cleaned, rhs + 0.0, provenance, est.kind, local, index, indicator)  # no -0.0


def _sense_sides(con: NonlinearConstraint) -> List[bool]:
    """Estimator sides implied by the sense: under for ``<=``, over for ``>=``."""
    sides = []
    if con.sense in (LE, EQ):
        sides.append(False)
    if con.sense in (GE, EQ):
        sides.append(True)
    return sides


def _violated_sides(con: NonlinearConstraint, point, tol: float) -> List[bool]:
    try:
        r = eval_expr(con.body, point) - point[con.aux_var]
    except (ExpressionDomainError, OverflowError):
        return []
    return [over for over in _sense_sides(con) if (r < -tol if over else r > tol)]


def structure_estimator(s: ScStructure, point, settings: SeparationSettings, box,
                        over: bool = False, prober: Optional[Prober] = None,
                        global_box=None) -> Tuple[Optional[AffineEstimator], bool]:
    """Strengthened estimator of ``s.sc_part``; second value marks local validity."""
    z = s.indicator
    on = {}
    tightened = False
    if settings.mode is Mode.CONVEX:
        # convex mode needs convexity on the whole structure domain, off point included
        domain = {j: b.hull(Interval(s.off_point[j], s.off_point[j]))
                  for j, b in s.on_box.items()}
        if not _tangent_ok(curvature(s.sc_part, domain), over):
            return None, False
    convex_route = _tangent_ok(curvature(s.sc_part, s.on_box), over)
    if not convex_route and settings.mode is not Mode.FULL:
        return None, False
    probed = None
    if settings.bound_tightening and prober is not None and not convex_route:
        probed = prober(z)
        if probed is None:
            return None, False
    for info in s.sc_vars:
        b = info.on_domain.intersect(_box_get(box, info.var))
        if probed is not None and b is not None:
            b = b.intersect(_box_get(probed, info.var))
        if b is None:
            return None, False
        g = info.on_domain
        if global_box is not None:
            g = g.intersect(_box_get(global_box, info.var)) or g
        if b != g:
            tightened = True
        on[info.var] = b
    off = s.off_point
    z_hat = max(float(point[z]), MIN_Z)
    y_star = {j: off[j] + (float(point[j]) - off[j]) / z_hat for j in off}
    curv_on = curvature(s.sc_part, on)
    if _tangent_ok(curv_on, over):
        hull = {j: on[j].hull(Interval(y_star[j], y_star[j])) for j in on}
        at = y_star
        if (max(abs(v) for v in y_star.values()) > 1e6
                or not _tangent_ok(curvature(s.sc_part, hull), over)):
            at = _clip(y_star, on, on)
        phi = _safe_tangent(s.sc_part, at)
        if phi is None:
            phi = _safe_tangent(s.sc_part, _clip(y_star, on, on))
        if phi is None:
            return None, False
        local = tightened and not _tangent_ok(
            curvature(s.sc_part, {i.var: i.on_domain for i in s.sc_vars}), over)
    else:
        if settings.mode is not Mode.FULL:
            return None, False
        phi, _ = estimate(s.sc_part, on, _clip(y_star, on, on), over=over)
        if phi is None:
            return None, False
        local = tightened
    strengthened = strengthen_perspective(phi, s, s.f_off)
    return strengthened, local


def separate_constraint(point, con: NonlinearConstraint, structures: Sequence[ScStructure],
                        settings: SeparationSettings, box, prober: Optional[Prober] = None,
                        global_box=None, index: int = -1) -> List[LinearCut]:
    """Cuts separating ``point`` from the relaxation of ``con``.

    Without usable structure (or with ``Mode.OFF``) a plain estimator of the
    body on ``box`` is used for violated sides. Otherwise each indicator's
    strengthened estimator of the semi-continuous part, plus the unchanged
    linear remainder, yields a candidate; the most violated candidate is kept.
    Structured candidates are tried even when ``point`` satisfies ``con``,
    since it may still lie outside the convex hull of the on and off sets.
    """
    out: List[LinearCut] = []
    violated = _violated_sides(con, point, settings.feas_tol)
    use_structures = settings.mode is not Mode.OFF and bool(structures)
    # a point inside the plain relaxation may still lie outside the on/off hull
    for over in (_sense_sides(con) if use_structures else violated):
        cands: List[LinearCut] = []
        if use_structures:
            for s in structures:
                est, local = structure_estimator(s, point, settings, box, over, prober, global_box)
                if est is None:
                    continue
                rest = AffineEstimator(dict(s.nsc_part), 0.0, est.kind)
                cut = _make_cut(est + rest, con, over, box, PERSPECTIVE, local, index, s.indicator)
                if cut is not None and cut.violation(point) >= settings.min_violation:
                    cands.append(cut)
        if not cands and over in violated:
            est, dep = estimate(con.body, box, point, over=over, global_box=global_box)
            if est is not None:
                local = dep and global_box is not None and _differs(box, global_box, con.body)
                cut = _make_cut(est, con, over, box, PLAIN, local or (dep and global_box is None),
                                index)
                if cut is not None and cut.violation(point) >= settings.min_violation:
                    cands.append(cut)
        cands.sort(key=lambda c: -c.violation(point))
        out.extend(cands[:1])
    out.sort(key=lambda c: -c.violation(point))
    return out[: settings.max_cuts_per_round]


def _differs(box, global_box, body: Expr) -> bool:
    return any(_box_get(box, j) != _box_get(global_box, j) for j in variables(body))
