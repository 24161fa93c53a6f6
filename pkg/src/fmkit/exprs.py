"""Expression trees used by arc guards, trigger spawn attributes, and assign blocks.

Scalar types are ``int``, ``dec``, ``str``, and ``bool``.  Integer division
floors; dividing by zero raises :class:`EvalError`, which the simulator maps
to guard-false plus a "blocked" trace record.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Union

Value = Union[int, float, str, bool]

SCALAR_TYPES = ("int", "dec", "str", "bool")

_NUMERIC = {"int", "dec"}
_CMP_OPS = {"==", "!=", "<", "<=", ">", ">="}
_ARITH_OPS = {"+", "-", "*", "/"}
_BOOL_OPS = {"and", "or"}


class TypeError_(Exception):
    """An expression failed to type-check against a thing kind."""


class EvalError(Exception):
    """Evaluation failed (division by zero)."""


@dataclass(frozen=True)
class Lit:
    value: Value

    @property
    def type(self) -> str:
        if isinstance(self.value, bool):
            return "bool"
        if isinstance(self.value, int):
            return "int"
        if isinstance(self.value, float):
            return "dec"
        return "str"


@dataclass(frozen=True)
class Attr:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # "not" | "-"
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[Lit, Attr, Unary, Binary]


def typecheck(expr: Expr, attr_types: Mapping[str, str]) -> str:
    """Return the expression's type, or raise TypeError_ naming the problem."""
    if isinstance(expr, Lit):
        return expr.type
    if isinstance(expr, Attr):
        t = attr_types.get(expr.name)
        if t is None:
            raise TypeError_(f"unknown attribute '{expr.name}'")
        return t
    if isinstance(expr, Unary):
        t = typecheck(expr.operand, attr_types)
        if expr.op == "not":
            if t != "bool":
                raise TypeError_(f"'not' needs bool, got {t}")
            return "bool"
        if t not in _NUMERIC:
            raise TypeError_(f"unary '-' needs int or dec, got {t}")
        return t
    t_left = typecheck(expr.left, attr_types)
    t_right = typecheck(expr.right, attr_types)
    op = expr.op
    if op in _BOOL_OPS:
        if t_left != "bool" or t_right != "bool":
            raise TypeError_(f"'{op}' needs bool operands, got {t_left} and {t_right}")
        return "bool"
    if op in _ARITH_OPS:
        if t_left not in _NUMERIC or t_right not in _NUMERIC:
            raise TypeError_(f"'{op}' needs numeric operands, got {t_left} and {t_right}")
        return "dec" if "dec" in (t_left, t_right) else "int"
    if op in _CMP_OPS:
        numeric = t_left in _NUMERIC and t_right in _NUMERIC
        if op in ("==", "!="):
            if not numeric and t_left != t_right:
                raise TypeError_(f"'{op}' needs same-typed operands, got {t_left} and {t_right}")
        elif not numeric:
            raise TypeError_(f"'{op}' needs numeric operands, got {t_left} and {t_right}")
        return "bool"
    raise TypeError_(f"unknown operator '{op}'")


def evaluate(expr: Expr, attrs: Mapping[str, Value]) -> Value:
    """Evaluate against a thing's attribute map.  Total except for EvalError."""
    if isinstance(expr, Lit):
        return expr.value
    if isinstance(expr, Attr):
        return attrs[expr.name]
    if isinstance(expr, Unary):
        v = evaluate(expr.operand, attrs)
        return (not v) if expr.op == "not" else -v
    if expr.op == "and":
        return bool(evaluate(expr.left, attrs)) and bool(evaluate(expr.right, attrs))
    if expr.op == "or":
        return bool(evaluate(expr.left, attrs)) or bool(evaluate(expr.right, attrs))
    lv = evaluate(expr.left, attrs)
    rv = evaluate(expr.right, attrs)
    op = expr.op
    if op == "==":
        return lv == rv
    if op == "!=":
        return lv != rv
    if op == "<":
        return lv < rv
    if op == "<=":
        return lv <= rv
    if op == ">":
        return lv > rv
    if op == ">=":
        return lv >= rv
    if op == "+":
        return lv + rv
    if op == "-":
        return lv - rv
    if op == "*":
        return lv * rv
    if rv == 0:
        raise EvalError("division by zero")
    if isinstance(lv, int) and not isinstance(lv, bool) and isinstance(rv, int):
        return lv // rv
    return lv / rv


_PRECEDENCE = {
    "or": 1,
    "and": 2,
    "==": 3, "!=": 3, "<": 3, "<=": 3, ">": 3, ">=": 3,
    "+": 4, "-": 4,
    "*": 5, "/": 5,
}


def render(expr: Expr, parent_prec: int = 0) -> str:
    """Deterministic source form; inverse of the parser's expression grammar."""
    if isinstance(expr, Lit):
        v = expr.value
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, str):
            escaped = v.replace("\\", "\\\\").replace('"', '\\"')
            return f'"{escaped}"'
        return repr(v)
    if isinstance(expr, Attr):
        return expr.name
    if isinstance(expr, Unary):
        inner = render(expr.operand, 6)
        return f"not {inner}" if expr.op == "not" else f"-{inner}"
    prec = _PRECEDENCE[expr.op]
    text = f"{render(expr.left, prec)} {expr.op} {render(expr.right, prec + 1)}"
    return f"({text})" if prec < parent_prec else text
