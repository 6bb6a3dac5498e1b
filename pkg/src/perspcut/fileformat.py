"""Plain-text instance files.

    # comment
    VARS
    x continuous 0 0.5
    z binary 0 1
    OBJ
    -1*x + y
    LIN
    0.5*z - y <= 0
    NONLIN
    -y^3 + y - x <= 0
    y^2 = u           # ``expr = name`` with name absent from expr: u is defined by expr

Expressions use ``+ - * / ^`` with integer exponents, division by constants
only, and the functions ``exp`` and ``log``. Bounds accept ``inf``/``-inf``.
"""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .model.expr import (Const, Expr, UnsupportedExpressionError, Var, affine_coefficients,
                         exp, is_affine, linear_sum, log, mul, neg, power, to_infix, variables)
from .model.instance import BINARY, CONTINUOUS, EQ, GE, LE, Instance, RawConstraint, Variable, \
    to_extended_form

SECTIONS = ("VARS", "OBJ", "LIN", "NONLIN")
KINDS = (CONTINUOUS, BINARY)


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line, self.column = line, column
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(where + message)


_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_.\[\]]*)
  | (?P<op><=|>=|==|=|[-+*/^(),])
""", re.VERBOSE)


@dataclass
class _Tok:
    kind: str
    text: str
    col: int


def _tokenize(text: str, line: int, col0: int = 1) -> List[_Tok]:
    out, pos = [], 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col0 + pos)
        if m.lastgroup != "ws":
            out.append(_Tok(m.lastgroup, m.group(), col0 + pos))
        pos = m.end()
    out.append(_Tok("end", "", col0 + pos))
    return out


class _ExprParser:
    """Recursive descent: sum > product > unary minus > power > atom."""

    def __init__(self, toks: List[_Tok], names: Dict[str, int], line: int):
        self.toks, self.i, self.names, self.line = toks, 0, names, line

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def error(self, msg: str, tok: Optional[_Tok] = None) -> ParseError:
        tok = tok or self.peek()
        return ParseError(msg, self.line, tok.col)

    def expect(self, text: str) -> _Tok:
        t = self.take()
        if t.text != text:
            raise self.error(f"expected {text!r}, found {t.text or 'end of line'!r}", t)
        return t

    def parse_sum(self) -> Expr:
        terms = [(1.0, self.parse_product())]
        while self.peek().text in ("+", "-"):
            sign = 1.0 if self.take().text == "+" else -1.0
            terms.append((sign, self.parse_product()))
        return terms[0][1] if len(terms) == 1 else linear_sum(terms)

    def parse_product(self) -> Expr:
        e = self.parse_unary()
        while self.peek().text in ("*", "/"):
            op = self.take()
            rhs = self.parse_unary()
            if op.text == "*":
                e = mul(e, rhs)
            else:
                if not isinstance(rhs, Const):
                    raise self.error("division is only allowed by constants", op)
                if rhs.value == 0.0:
                    raise self.error("division by zero", op)
                e = mul(e, 1.0 / rhs.value)
        return e

    def parse_unary(self) -> Expr:
        if self.peek().text == "-":
            self.take()
            return neg(self.parse_unary())
        if self.peek().text == "+":
            self.take()
            return self.parse_unary()
        return self.parse_power()

    def parse_power(self) -> Expr:
        base = self.parse_atom()
        if self.peek().text == "^":
            op = self.take()
            t = self.take()
            if t.kind != "num" or not re.fullmatch(r"\d+", t.text) or int(t.text) < 1:
                raise self.error("exponent must be an integer literal >= 1", t)
            if self.peek().text == "^":
                raise self.error("chained exponents are not supported", op)
            return power(base, int(t.text))
        return base

    def parse_atom(self) -> Expr:
        t = self.take()
        if t.kind == "num":
            return Const(float(t.text))
        if t.text == "(":
            e = self.parse_sum()
            self.expect(")")
            return e
        if t.kind == "name":
            if t.text in ("exp", "log") and self.peek().text == "(":
                self.take()
                arg = self.parse_sum()
                self.expect(")")
                try:
                    return exp(arg) if t.text == "exp" else log(arg)
                except ValueError as err:
                    raise self.error(str(err), t) from None
            if t.text in ("inf",):
                raise self.error("infinite constants are not allowed in expressions", t)
            j = self.names.get(t.text)
            if j is None:
                raise self.error(f"unknown variable {t.text!r}", t)
            return Var(j)
        raise self.error(f"unexpected {t.text or 'end of line'!r}", t)


def _parse_expr(toks: List[_Tok], names, line) -> Expr:
    p = _ExprParser(toks, names, line)
    e = p.parse_sum()
    if p.peek().kind != "end":
        raise p.error(f"unexpected {p.peek().text!r}")
    return e


def _parse_bound(text: str, line: int, col: int) -> float:
    t = text.lower()
    if t in ("inf", "+inf"):
        return math.inf
    if t == "-inf":
        return -math.inf
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"invalid bound {text!r}", line, col) from None


def _split_relation(toks: List[_Tok], line: int) -> Tuple[List[_Tok], str, List[_Tok]]:
    idx = [i for i, t in enumerate(toks) if t.text in ("<=", ">=", "=", "==")]
    if len(idx) != 1:
        col = toks[idx[1]].col if len(idx) > 1 else 1
        raise ParseError("expected exactly one of <=, >=, =", line, col)
    k = idx[0]
    sense = {"<=": LE, ">=": GE, "=": EQ, "==": EQ}[toks[k].text]
    left, right = toks[:k] + [_Tok("end", "", toks[k].col)], toks[k + 1:]
    if len(left) == 1 or len(right) == 1:
        raise ParseError("missing expression around relation", line, toks[k].col)
    return left, sense, right


def parse_instance(text: str, name: str = "") -> Instance:
    """Parse an instance file and return it in extended form."""
    section = None
    variables_: List[Variable] = []
    names: Dict[str, int] = {}
    objective: Dict[int, float] = {}
    raw: List[RawConstraint] = []
    seen_obj = False
    counts = {"LIN": 0, "NONLIN": 0}
    for lineno, full in enumerate(text.splitlines(), start=1):
        body = full.split("#", 1)[0]
        if not body.strip():
            continue
        stripped = body.strip()
        col0 = body.index(stripped) + 1
        if stripped.upper() in SECTIONS and stripped.isupper():
            section = stripped
            continue
        if section is None:
            raise ParseError("content before the first section header", lineno, col0)
        if section == "VARS":
            parts = stripped.split()
            if len(parts) != 4:
                raise ParseError("expected 'name kind lower upper'", lineno, col0)
            vname, kind, lo, hi = parts
            if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_.\[\]]*", vname) or vname in ("exp", "log"):
                raise ParseError(f"invalid variable name {vname!r}", lineno, col0)
            if vname in names:
                raise ParseError(f"duplicate variable {vname!r}", lineno, col0)
            if kind not in KINDS:
                raise ParseError(f"unknown kind {kind!r}", lineno, body.index(kind) + 1)
            lower = _parse_bound(lo, lineno, col0)
            upper = _parse_bound(hi, lineno, col0)
            try:
                v = Variable(len(variables_), vname, kind, lower, upper)
            except ValueError as err:
                raise ParseError(str(err), lineno, col0) from None
            names[vname] = v.id
            variables_.append(v)
            continue
        toks = _tokenize(body, lineno)
        if section == "OBJ":
            if seen_obj:
                raise ParseError("only one objective line is allowed", lineno, col0)
            seen_obj = True
            e = _parse_expr(toks, names, lineno)
            if not is_affine(e):
                raise ParseError("objective must be linear", lineno, col0)
            coeffs, c0 = affine_coefficients(e)
            if c0 != 0.0:
                raise ParseError("objective constants are not supported", lineno, col0)
            objective = coeffs
            continue
        left, sense, right = _split_relation(toks, lineno)
        lhs = _parse_expr(left, names, lineno)
        rhs = _parse_expr(right, names, lineno)
        cname = f"{section.lower()}{counts[section]}"
        counts[section] += 1
        if section == "LIN":
            diff = linear_sum([(1.0, lhs), (-1.0, rhs)])
            if not is_affine(diff):
                raise ParseError("LIN constraints must be linear", lineno, col0)
            raw.append(RawConstraint(diff, sense, 0.0, None, cname))
            continue
        if (sense == EQ and isinstance(rhs, Var) and rhs.id not in variables(lhs)
                and not is_affine(lhs)):
            raw.append(RawConstraint(lhs, EQ, 0.0, rhs.id, cname))
        else:
            raw.append(RawConstraint(linear_sum([(1.0, lhs), (-1.0, rhs)]), sense, 0.0, None,
                                     cname))
    variables_ = [Variable(v.id, v.name, v.kind, v.lower, v.upper, objective.get(v.id, 0.0))
                  for v in variables_]
    try:
        return to_extended_form(variables_, raw, name=name)
    except UnsupportedExpressionError:
        raise
    except ValueError as err:
        raise ParseError(str(err)) from None


def _bound_text(b: float) -> str:
    if b == math.inf:
        return "inf"
    if b == -math.inf:
        return "-inf"
    return repr(float(b))


def _sense_text(sense: str) -> str:
    return {LE: "<=", GE: ">=", EQ: "="}[sense]


def format_instance(inst: Instance) -> str:
    """Instance file text for the user-level model (declared variables and constraints)."""
    decl = inst.variables[: inst.n_original]
    names = [v.name for v in decl]
    lines = ["VARS"]
    for v in decl:
        lines.append(f"{v.name} {v.kind} {_bound_text(v.lower)} {_bound_text(v.upper)}")
    obj = {v.id: v.objective_coeff for v in decl if v.objective_coeff != 0.0}
    lines.append("OBJ")
    lines.append(" + ".join(f"{k!r}*{names[j]}" if k >= 0 else f"({k!r})*{names[j]}"
                            for j, k in obj.items()) or "0")
    lin = [c for c in inst.original_constraints if is_affine(c.expr) and c.defines is None]
    nonlin = [c for c in inst.original_constraints if c not in lin]
    lines.append("LIN")
    for c in lin:
        lines.append(f"{to_infix(c.expr, names)} {_sense_text(c.sense)} {c.rhs!r}")
    lines.append("NONLIN")
    for c in nonlin:
        rhs = names[c.defines] if c.defines is not None else repr(c.rhs)
        lines.append(f"{to_infix(c.expr, names)} {_sense_text(c.sense)} {rhs}")
    return "\n".join(lines) + "\n"


def read_instance(path: str) -> Instance:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_instance(text, name=os.path.splitext(os.path.basename(path))[0])
