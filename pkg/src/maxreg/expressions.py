"""Closed-form inputs in a minimal arithmetic grammar.

Accepted: the identifiers declared by the caller (``t``, ``x`` for space-time
fields, ``u`` for coefficient maps), numeric literals, the operators
``+ - * / ^`` and the functions ``sin cos exp log abs``.  Parsing goes through
sympy with a whitelisted namespace so stray identifiers or functions are
rejected rather than silently created.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import sympy
from sympy.core.function import AppliedUndef
from sympy.parsing.sympy_parser import (
    convert_xor,
    parse_expr,
    standard_transformations,
)

__all__ = ["parse_expression", "lambdify_expression", "ManufacturedProblem", "manufactured_problem"]

_FUNCTIONS = {
    "sin": sympy.sin,
    "cos": sympy.cos,
    "exp": sympy.exp,
    "log": sympy.log,
    "abs": sympy.Abs,
}
_TRANSFORMS = standard_transformations + (convert_xor,)


def parse_expression(text: str, variables: Sequence[str] = ("t", "x")) -> sympy.Expr:
    """Parse ``text`` into a sympy expression over the declared variables."""
    symbols = {name: sympy.Symbol(name, real=True) for name in variables}
    local = {**_FUNCTIONS, **symbols}
    # numeral constructors the tokenizer injects; stray names still surface as
    # free symbols and are rejected below
    global_dict = {
        "Integer": sympy.Integer,
        "Float": sympy.Float,
        "Rational": sympy.Rational,
        "Symbol": sympy.Symbol,
        "Function": sympy.Function,
    }
    try:
        expr = parse_expr(
            text, local_dict=local, global_dict=global_dict, transformations=_TRANSFORMS
        )
    except (SyntaxError, TypeError, ValueError) as exc:
        raise ValueError(f"cannot parse expression {text!r}: {exc}") from exc
    stray = expr.free_symbols - set(symbols.values())
    if stray:
        names = ", ".join(sorted(str(s) for s in stray))
        raise ValueError(f"unknown identifiers in expression: {names}")
    if expr.atoms(AppliedUndef):
        bad = ", ".join(sorted(str(f.func) for f in expr.atoms(AppliedUndef)))
        raise ValueError(f"unknown functions in expression: {bad}")
    return expr


def lambdify_expression(
    text: str, variables: Sequence[str] = ("t", "x")
) -> Callable[..., np.ndarray]:
    expr = parse_expression(text, variables)
    symbols = [sympy.Symbol(name, real=True) for name in variables]
    fn = sympy.lambdify(symbols, expr, modules="numpy")

    def wrapped(*args):
        out = fn(*args)
        return np.asarray(out) + np.zeros(np.broadcast_shapes(*(np.shape(a) for a in args)))

    return wrapped


@dataclass(frozen=True)
class ManufacturedProblem:
    """Symbolically derived data for a quasilinear recovery test.

    Given a target solution ``u*(t, x)`` and a coefficient law ``a(u)``, the
    forcing is ``f = du*/dt - d/dx (a(u*) du*/dx)`` so the target is the exact
    solution of the nonlinear problem.
    """

    solution: Callable[[np.ndarray, np.ndarray], np.ndarray]
    coefficient: Callable[[np.ndarray], np.ndarray]
    forcing: Callable[[np.ndarray, np.ndarray], np.ndarray]
    solution_text: str
    coefficient_text: str


def manufactured_problem(u_text: str, a_text: str) -> ManufacturedProblem:
    t, x, u = (sympy.Symbol(n, real=True) for n in ("t", "x", "u"))
    u_expr = parse_expression(u_text, ("t", "x"))
    a_expr = parse_expression(a_text, ("u",))
    a_of_u = a_expr.subs(u, u_expr)
    f_expr = sympy.diff(u_expr, t) - sympy.diff(a_of_u * sympy.diff(u_expr, x), x)
    f_expr = sympy.simplify(f_expr)

    u_fn = sympy.lambdify((t, x), u_expr, modules="numpy")
    a_fn = sympy.lambdify((u,), a_expr, modules="numpy")
    f_fn = sympy.lambdify((t, x), f_expr, modules="numpy")

    def broadcast2(fn):
        def wrapped(tt, xx):
            return np.asarray(fn(tt, xx)) + np.zeros(
                np.broadcast_shapes(np.shape(tt), np.shape(xx))
            )

        return wrapped

    def coefficient(vals):
        return np.asarray(a_fn(vals)) + np.zeros(np.shape(vals))

    return ManufacturedProblem(
        broadcast2(u_fn), coefficient, broadcast2(f_fn), u_text, a_text
    )
