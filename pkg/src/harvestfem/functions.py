"""Space-time scalar functions ``f(t, x, y)`` and a small expression language."""
from __future__ import annotations

import ast
import math
from typing import Callable

import numpy as np

from .errors import ConfigurationError

FD_STEP = 1e-6


class SpaceTimeFunction:
    """A vectorised ``f(t, x, y)`` with an optional analytic spatial gradient.

    Without an analytic gradient, :meth:`gradient` falls back to central
    differences with step ``FD_STEP``.
    """

    def __init__(self, value: Callable, grad: Callable | None = None, name: str | None = None):
        self._value = value
        self._grad = grad
        self.name = name or getattr(value, "__name__", "f")

    def __call__(self, t, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = self._value(t, x, y)
        return np.broadcast_to(np.asarray(out, dtype=float), np.broadcast(x, y).shape)

    @property
    def has_gradient(self) -> bool:
        return self._grad is not None

    def gradient(self, t, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast(x, y).shape
        if self._grad is not None:
            gx, gy = self._grad(t, x, y)
            return np.broadcast_to(gx, shape), np.broadcast_to(gy, shape)
        s = FD_STEP
        gx = (self(t, x + s, y) - self(t, x - s, y)) / (2 * s)
        gy = (self(t, x, y + s) - self(t, x, y - s)) / (2 * s)
        return gx, gy

    def __repr__(self):
        return f"SpaceTimeFunction({self.name})"


def constant(c: float) -> SpaceTimeFunction:
    c = float(c)
    return SpaceTimeFunction(lambda t, x, y: c, lambda t, x, y: (0.0, 0.0), name=repr(c))


ZERO = constant(0.0)


def as_function(obj) -> SpaceTimeFunction:
    if isinstance(obj, SpaceTimeFunction):
        return obj
    if isinstance(obj, (int, float, np.floating, np.integer)):
        return constant(float(obj))
    if callable(obj):
        return SpaceTimeFunction(obj)
    raise TypeError(f"cannot interpret {obj!r} as a function of (t, x, y)")


# -- expression mini-language -------------------------------------------------

_NAMES = {"t", "x", "y"}
_CONSTANTS = {"pi": math.pi, "π": math.pi}
_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


def _compile(node):
    if isinstance(node, ast.Expression):
        return _compile(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        v = float(node.value)
        return lambda env: v
    if isinstance(node, ast.Name):
        if node.id in _NAMES:
            name = node.id
            return lambda env: env[name]
        if node.id in _CONSTANTS:
            v = _CONSTANTS[node.id]
            return lambda env: v
        raise ConfigurationError(f"unknown name {node.id!r} in expression")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
        inner = _compile(node.operand)
        if isinstance(node.op, ast.USub):
            return lambda env: -inner(env)
        return inner
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        op = _BINOPS[type(node.op)]
        lhs, rhs = _compile(node.left), _compile(node.right)
        return lambda env: op(lhs(env), rhs(env))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS:
        if len(node.args) != 1 or node.keywords:
            raise ConfigurationError(f"{node.func.id} takes exactly one argument")
        fn = _FUNCS[node.func.id]
        arg = _compile(node.args[0])
        return lambda env: fn(arg(env))
    raise ConfigurationError(f"unsupported syntax in expression: {ast.dump(node)[:60]}")


def parse_expression(text: str) -> SpaceTimeFunction:
    """Compile arithmetic over ``t, x, y`` with ``sin, cos, exp`` and ``pi``.

    ``^`` is accepted as a power operator.
    """
    src = text.strip().replace("^", "**")
    if not src:
        raise ConfigurationError("empty expression")
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise ConfigurationError(f"cannot parse expression {text!r}: {exc.msg}") from None
    body = _compile(tree)

    def value(t, x, y):
        return body({"t": t, "x": x, "y": y})

    return SpaceTimeFunction(value, name=text.strip())
