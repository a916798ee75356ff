"""Closed-form expression catalog for scenario inputs.

Accepted formulas are built from numeric constants, ``pi``, the
variables ``t``, ``alpha``, ``x``, ``y``, the operators ``+ - * /`` and
``**`` and the functions ``sin``, ``cos``, ``exp``. Division is only
allowed by constants and exponents must be non-negative integers, so
every catalog entry is smooth. The text is walked with :mod:`ast` and
rebuilt as a sympy tree; nothing is ever passed to ``eval``.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from .errors import InvalidInputError

SYMBOLS = {name: sp.Symbol(name, real=True) for name in ("t", "alpha", "x", "y")}
FUNCTIONS = {"sin": sp.sin, "cos": sp.cos, "exp": sp.exp}
CONSTANTS = {"pi": sp.pi}
PERIODIC = ("x", "y")


class _Builder(ast.NodeVisitor):
    def __init__(self, allowed: tuple[str, ...]):
        self.allowed = allowed

    def generic_visit(self, node):
        raise InvalidInputError(f"unsupported syntax: {type(node).__name__}")

    def visit_Expression(self, node):
        return self.visit(node.body)

    def visit_Constant(self, node):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise InvalidInputError(f"unsupported constant {node.value!r}")
        return sp.nsimplify(node.value) if isinstance(node.value, int) else sp.Float(node.value)

    def visit_Name(self, node):
        if node.id in CONSTANTS:
            return CONSTANTS[node.id]
        if node.id in SYMBOLS:
            if node.id not in self.allowed:
                raise InvalidInputError(f"variable '{node.id}' not allowed here (allowed: {', '.join(self.allowed)})")
            return SYMBOLS[node.id]
        raise InvalidInputError(f"unknown name '{node.id}'")

    def visit_UnaryOp(self, node):
        operand = self.visit(node.operand)
        if isinstance(node.op, ast.USub):
            return -operand
        if isinstance(node.op, ast.UAdd):
            return operand
        raise InvalidInputError(f"unsupported unary operator {type(node.op).__name__}")

    def visit_BinOp(self, node):
        left, right = self.visit(node.left), self.visit(node.right)
        if isinstance(node.op, ast.Add):
            return left + right
        if isinstance(node.op, ast.Sub):
            return left - right
        if isinstance(node.op, ast.Mult):
            return left * right
        if isinstance(node.op, ast.Div):
            if right.free_symbols or right == 0:
                raise InvalidInputError("division is only allowed by non-zero constants")
            return left / right
        if isinstance(node.op, ast.Pow):
            if right.free_symbols or not (right.is_integer and right >= 0):
                raise InvalidInputError("exponents must be non-negative integer constants")
            return left**right
        raise InvalidInputError(f"unsupported operator {type(node.op).__name__}")

    def visit_Call(self, node):
        if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
            raise InvalidInputError(f"unknown function in call: {ast.unparse(node.func)}")
        if len(node.args) != 1 or node.keywords:
            raise InvalidInputError(f"{node.func.id}() takes exactly one argument")
        return FUNCTIONS[node.func.id](self.visit(node.args[0]))


@dataclass(frozen=True)
class Expression:
    """A parsed catalog formula, callable on numpy arrays by keyword."""

    source: str
    variables: tuple[str, ...]
    expr: sp.Expr = field(repr=False)
    periodic: tuple[str, ...] = PERIODIC

    def __post_init__(self):
        fn = sp.lambdify([SYMBOLS[v] for v in self.variables], self.expr, modules="numpy")
        object.__setattr__(self, "_fn", fn)

    @classmethod
    def parse(cls, text: str, variables: tuple[str, ...] = ("t", "alpha", "x"),
              periodic: tuple[str, ...] = PERIODIC) -> "Expression":
        """Parse ``text``; the variables listed in ``periodic`` must have period one."""
        text = str(text).strip()
        if not text:
            raise InvalidInputError("empty expression")
        try:
            tree = ast.parse(text, mode="eval")
        except SyntaxError as exc:
            raise InvalidInputError(f"cannot parse expression {text!r}: {exc.msg}") from exc
        expr = _Builder(variables).visit(tree)
        out = cls(source=text, variables=tuple(variables), expr=sp.sympify(expr), periodic=tuple(periodic))
        out.check_periodic()
        return out

    def __call__(self, **values) -> np.ndarray:
        args = [np.asarray(values.get(v, 0.0), dtype=float) for v in self.variables]
        shape = np.broadcast_shapes(*(a.shape for a in args)) if args else ()
        out = np.asarray(self._fn(*args), dtype=float)
        return np.broadcast_to(out, shape).copy() if out.shape != shape else out

    def diff(self, var: str, order: int = 1) -> "Expression":
        if var not in self.variables:
            raise InvalidInputError(f"cannot differentiate in '{var}'")
        return Expression(
            source=f"d^{order}/d{var}^{order}({self.source})",
            variables=self.variables,
            periodic=self.periodic,
            expr=sp.diff(self.expr, SYMBOLS[var], order),
        )

    @property
    def is_zero(self) -> bool:
        return self.expr == 0

    def check_periodic(self, samples: int = 7) -> None:
        """Reject formulas that are not 1-periodic in the periodic variables."""
        rng = np.random.default_rng(12345)
        base = {v: rng.uniform(0.0, 1.0, samples) for v in self.variables}
        ref = self(**base)
        scale = 1.0 + np.max(np.abs(ref))
        for v in self.periodic:
            if v not in self.variables or SYMBOLS[v] not in self.expr.free_symbols:
                continue
            shifted = dict(base)
            shifted[v] = base[v] + 1.0
            if np.max(np.abs(self(**shifted) - ref)) > 1e-9 * scale:
                raise InvalidInputError(f"expression {self.source!r} is not 1-periodic in {v}")


def parse(text: str, variables: tuple[str, ...] = ("t", "alpha", "x"), periodic: tuple[str, ...] = PERIODIC) -> Expression:
    return Expression.parse(text, variables, periodic)
