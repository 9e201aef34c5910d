"""Drift catalogue and a restricted expression grammar for drift functions.

Expressions may use ``x``, ``y``, numeric constants, ``pi``, the operators
``+ - * / ^`` (``**`` is accepted too) and the functions ``exp``, ``sin``,
``cos``.  Anything else is rejected before compilation.
"""

import ast

import numpy as np

from .errors import ConfigError

# name -> (fast drift f, slow drift g)
CATALOGUE = {
    "ou_linear": ("y - x", "-x"),
}

_FUNCS = {"exp": np.exp, "sin": np.sin, "cos": np.cos}
_NAMES = {"x", "y", "pi"}
_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)
_UNARY = (ast.UAdd, ast.USub)


def _check(node):
    if isinstance(node, ast.Expression):
        return _check(node.body)
    if isinstance(node, ast.BinOp):
        if not isinstance(node.op, _BINOPS):
            raise ConfigError(f"operator {type(node.op).__name__} not allowed")
        _check(node.left)
        _check(node.right)
    elif isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, _UNARY):
            raise ConfigError(f"operator {type(node.op).__name__} not allowed")
        _check(node.operand)
    elif isinstance(node, ast.Call):
        if not (isinstance(node.func, ast.Name) and node.func.id in _FUNCS):
            raise ConfigError("only exp, sin, cos may be called")
        if len(node.args) != 1 or node.keywords:
            raise ConfigError("functions take exactly one argument")
        _check(node.args[0])
    elif isinstance(node, ast.Name):
        if node.id not in _NAMES:
            raise ConfigError(f"unknown name {node.id!r}")
    elif isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ConfigError(f"constant {node.value!r} not allowed")
    else:
        raise ConfigError(f"syntax element {type(node).__name__} not allowed")


class DriftExpression:
    """A compiled scalar drift ``(x, y) -> value`` that broadcasts over arrays."""

    def __init__(self, text):
        self.text = text.strip()
        src = self.text.replace("^", "**")
        try:
            tree = ast.parse(src, mode="eval")
        except SyntaxError as exc:
            raise ConfigError(f"cannot parse drift expression {text!r}") from exc
        _check(tree)
        self._code = compile(tree, "<drift>", "eval")

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        env = dict(_FUNCS, x=x, y=y, pi=np.pi)
        val = eval(self._code, {"__builtins__": {}}, env)
        return np.broadcast_to(np.asarray(val, dtype=float), np.broadcast(x, y).shape) * 1.0

    def __repr__(self):
        return f"DriftExpression({self.text!r})"


def resolve_drift(value, role):
    """Turn a config value into a drift callable.

    ``value`` is a catalogue name, ``custom:<expr>`` or a bare expression;
    ``role`` is ``"f"`` or ``"g"`` and picks the catalogue component.
    """
    value = value.strip()
    if value in CATALOGUE:
        return DriftExpression(CATALOGUE[value][0 if role == "f" else 1])
    if value.startswith("custom:"):
        value = value[len("custom:"):]
    return DriftExpression(value)
