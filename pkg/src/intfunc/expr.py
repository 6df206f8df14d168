"""Tiny arithmetic-expression language for declarative problem files.

Expressions are parsed with :mod:`ast` and only a whitelist of node types is
accepted, e.g. ``"sin(t) + 0.5*t**2"`` or ``"max(0.5, t)"``.  Compiled
expressions are numpy-vectorized in their variables.
"""

from __future__ import annotations

import ast
from typing import Callable, Sequence

import numpy as np

__all__ = ["ExpressionError", "compile_expr", "compile_vector"]


class ExpressionError(ValueError):
    pass


_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
    "min": np.minimum,
    "max": np.maximum,
    "power": np.power,
}
_CONSTS = {"pi": np.pi, "e": np.e}
_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)
_UNOPS = (ast.UAdd, ast.USub)


def _check(node: ast.AST, variables: Sequence[str]) -> None:
    if isinstance(node, ast.Expression):
        _check(node.body, variables)
    elif isinstance(node, ast.BinOp):
        if not isinstance(node.op, _BINOPS):
            raise ExpressionError(f"operator {type(node.op).__name__} not allowed")
        _check(node.left, variables)
        _check(node.right, variables)
    elif isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, _UNOPS):
            raise ExpressionError(f"operator {type(node.op).__name__} not allowed")
        _check(node.operand, variables)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
            raise ExpressionError(f"unknown function in {ast.unparse(node)!r}")
        if node.keywords:
            raise ExpressionError("keyword arguments not allowed")
        want = 2 if node.func.id in ("min", "max", "power") else 1
        if len(node.args) != want:
            raise ExpressionError(f"{node.func.id} takes {want} argument(s)")
        for arg in node.args:
            _check(arg, variables)
    elif isinstance(node, ast.Name):
        if node.id not in variables and node.id not in _CONSTS:
            raise ExpressionError(f"unknown name {node.id!r}")
    elif isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ExpressionError(f"literal {node.value!r} not allowed")
    else:
        raise ExpressionError(f"syntax {type(node).__name__} not allowed")


def compile_expr(src: str | float | int, variables: Sequence[str] = ("t",)) -> Callable:
    """Compile ``src`` into a vectorized function of ``variables`` (positional).

    The result is broadcast against the arguments, so constants such as
    ``"0"`` still return arrays of the argument shape.
    """
    if isinstance(src, (int, float)) and not isinstance(src, bool):
        src = repr(float(src))
    if not isinstance(src, str):
        raise ExpressionError(f"expression must be a string or number, got {type(src).__name__}")
    try:
        tree = ast.parse(src.strip(), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {src!r}: {exc.msg}") from None
    _check(tree, variables)
    code = compile(tree, "<expr>", "eval")
    namespace = {"__builtins__": {}, **_FUNCS, **_CONSTS}
    names = tuple(variables)

    def fn(*args):
        if len(args) != len(names):
            raise TypeError(f"expected {len(names)} arguments")
        arrays = [np.asarray(a, dtype=float) for a in args]
        with np.errstate(all="ignore"):
            val = eval(code, namespace, dict(zip(names, arrays)))
        shape = np.broadcast_shapes(*(a.shape for a in arrays)) if arrays else ()
        return np.asarray(val, dtype=float) + np.zeros(shape)

    fn.source = src
    return fn


def compile_vector(srcs, variables: Sequence[str] = ("t",)) -> Callable:
    """Compile a scalar expression or list of expressions into ``t -> (..., n)``."""
    if isinstance(srcs, (str, int, float)):
        srcs = [srcs]
    fns = [compile_expr(s, variables) for s in srcs]

    def fn(*args):
        return np.stack([f(*args) for f in fns], axis=-1)

    fn.source = list(srcs)
    fn.dim = len(fns)
    return fn
