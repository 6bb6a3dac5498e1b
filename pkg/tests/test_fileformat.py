import glob
import os

import pytest

from perspcut.families import corpus, example1
from perspcut.fileformat import ParseError, format_instance, parse_instance, read_instance
from perspcut.model import UnsupportedExpressionError, eval_expr

EXAMPLE1 = """\
# cubic on/off example
VARS
x continuous 0 0.5
y continuous 0 1
z binary 0 1
OBJ
-1*x + 1*y
LIN
0.5*z - y <= 0
y - z <= 0
NONLIN
-y^3 + y - x <= 0
"""


def _rows(inst, ordered):
    lin = [(tuple(sorted(r.coeffs.items())), r.lhs, r.rhs) for r in inst.linear_constraints]
    nl = [(c.body, c.aux_var, c.sense, c.aux_bounds) for c in inst.nonlinear_constraints]
    if not ordered:
        lin, nl = sorted(lin), sorted(nl, key=repr)
    return lin, nl


def _same(a, b, ordered=True):
    """Structural equality; constraint names are labels only."""
    assert a.variables == b.variables
    assert _rows(a, ordered) == _rows(b, ordered)


def test_example_file():
    inst = parse_instance(EXAMPLE1, "ex")
    assert [v.name for v in inst.variables[:3]] == ["x", "y", "z"]
    assert inst.n == 4 and len(inst.nonlinear_constraints) == 1
    con = inst.nonlinear_constraints[0]
    assert con.aux_var == 3
    assert eval_expr(con.body, [0.1, 0.4, 1, 0]) == pytest.approx(-0.064 + 0.4 - 0.1)
    assert inst.objective == {0: -1.0, 1: 1.0}


def test_matches_generator():
    _same(parse_instance(EXAMPLE1), example1(), ordered=False)


def test_empty_nonlin_is_milp():
    text = "VARS\nz binary 0 1\nx continuous 0 3\nOBJ\n-z - x\nLIN\nz + x <= 2\nNONLIN\n"
    inst = parse_instance(text)
    assert not inst.nonlinear_constraints and len(inst.linear_constraints) == 1


@pytest.mark.parametrize("line, col", [("y ^ 1.5 <= 1", 5), ("y ^ 0 <= 1", 5),
                                       ("y / x <= 1", 3), ("q + y <= 1", 1), ("y <= 1 <= 2", 8),
                                       ("y $ 2 <= 1", 3)])
def test_errors_report_position(line, col):
    text = f"VARS\ny continuous 0 1\nx continuous 1 2\nOBJ\ny\nNONLIN\n{line}\n"
    with pytest.raises(ParseError) as err:
        parse_instance(text)
    assert err.value.line == 7 and err.value.column == col


@pytest.mark.parametrize("text", [
    "x continuous 0 1\n",
    "VARS\nx cont 0 1\n",
    "VARS\nx continuous 0\n",
    "VARS\nx continuous 0 1\nx continuous 0 1\n",
    "VARS\nx continuous 0 1\nOBJ\nx^2\n",
    "VARS\nx continuous 0 1\nLIN\nx^2 <= 1\n",
    "VARS\nx continuous 2 1\n",
])
def test_malformed_files(text):
    with pytest.raises(ParseError):
        parse_instance(text)


def test_unsupported_expression_is_distinct():
    text = "VARS\na continuous -1 1\nb continuous -1 1\nc continuous -1 1\nOBJ\na\nNONLIN\n" \
           "a*b*c - a^3*b <= 1\n"
    with pytest.raises(UnsupportedExpressionError):
        parse_instance(text)


def test_defining_equation():
    text = "VARS\ny continuous -1 1\nu continuous -5 5\nx continuous -9 9\nOBJ\nx\nNONLIN\n" \
           "y^2 = u\nexp(u) - x <= 1\n"
    inst = parse_instance(text)
    defs = [c for c in inst.nonlinear_constraints if c.aux_var == 1]
    assert len(defs) == 1 and defs[0].sense == "="
    assert inst.variables[1].lower >= -1e-9 and inst.variables[1].upper <= 1 + 1e-9


def test_infinite_bounds_and_comments():
    text = "VARS  # header\nx continuous -inf inf\nOBJ\n2*x  # linear\nLIN\nx >= -3\n"
    inst = parse_instance(text)
    assert inst.variables[0].lower == float("-inf")
    assert format_instance(inst).count("inf") == 2


@pytest.mark.parametrize("name, inst", sorted(corpus().items()))
def test_round_trip_generated(name, inst):
    once = parse_instance(format_instance(inst))
    _same(once, parse_instance(format_instance(once)))
    _same(once, inst, ordered=False)


def test_shipped_corpus_round_trip(corpus_dir):
    paths = sorted(glob.glob(os.path.join(corpus_dir, "*.txt")))
    assert len(paths) >= 20
    for p in paths:
        inst = read_instance(p)
        _same(inst, parse_instance(format_instance(inst)))
