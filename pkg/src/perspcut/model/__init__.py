"""Expressions, interval arithmetic, curvature and the problem instance."""

from .curvature import Curvature, curvature
from .expr import (Const, Exp, Expr, ExpressionDomainError, Log, Neg, Pow, Product, Sum,
                   UnsupportedExpressionError, Var, const, decompose, eval_expr, exp,
                   gradient, linear_sum, log, to_infix, var, variables)
from .instance import (BINARY, CONTINUOUS, EQ, GE, LE, Instance, LinearConstraint,
                       NonlinearConstraint, RawConstraint, Variable, evaluate_aux,
                       permute_instance, to_extended_form)
from .interval import INF, Interval, interval_eval

# ``eval`` shadows the builtin only inside this namespace
eval = eval_expr

__all__ = [
    "BINARY", "CONTINUOUS", "Const", "Curvature", "EQ", "Exp", "Expr", "ExpressionDomainError",
    "GE", "INF", "Instance", "Interval", "LE", "LinearConstraint", "Log", "Neg",
    "NonlinearConstraint", "Pow", "Product", "RawConstraint", "Sum",
    "UnsupportedExpressionError", "Var", "Variable", "const", "curvature", "decompose",
    "eval_expr", "evaluate_aux", "exp", "gradient", "interval_eval", "linear_sum", "log",
    "permute_instance", "to_extended_form", "to_infix", "var", "variables",
]
