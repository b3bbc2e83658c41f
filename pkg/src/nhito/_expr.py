"""Restricted arithmetic expressions over ``s`` and ``x``.

Only a whitelisted subset of Python syntax is accepted; nothing is passed to
``eval``. Expressions are evaluated with numpy so that ``x`` may carry a
leading batch axis.
"""

import ast

import numpy as np

_FUNCS = {
    "sqrt": np.sqrt,
    "exp": np.exp,
    "log": np.log,
    "sin": np.sin,
    "cos": np.cos,
    "tanh": np.tanh,
    "abs": np.abs,
    "min": np.minimum,
    "max": np.maximum,
    "norm": lambda v: np.linalg.norm(v, axis=-1),
    "maxnorm": lambda v: np.max(np.abs(v), axis=-1),
}

_CONSTS = {"pi": np.pi, "e": np.e}

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


class Expression:
    """A compiled expression. ``names`` lists the free variables used."""

    def __init__(self, source, parameters=None):
        self.source = source
        self.parameters = dict(parameters or {})
        try:
            tree = ast.parse(source, mode="eval")
        except SyntaxError as exc:
            raise ValueError(f"cannot parse expression {source!r}: {exc.msg}") from None
        self._tree = tree.body
        self.names = set()
        self._check(self._tree)

    def _check(self, node):
        if isinstance(node, ast.BinOp):
            if type(node.op) not in _BINOPS:
                raise ValueError(f"operator not allowed in {self.source!r}")
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp):
            if not isinstance(node.op, (ast.USub, ast.UAdd)):
                raise ValueError(f"operator not allowed in {self.source!r}")
            self._check(node.operand)
        elif isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
                raise ValueError(f"only numeric literals allowed in {self.source!r}")
        elif isinstance(node, ast.Name):
            if node.id in ("s", "x"):
                self.names.add(node.id)
            elif node.id not in _CONSTS and node.id not in self.parameters:
                raise ValueError(f"unknown name {node.id!r} in {self.source!r}")
        elif isinstance(node, ast.Subscript):
            if not (isinstance(node.value, ast.Name) and node.value.id == "x"):
                raise ValueError(f"only x[i] subscripts allowed in {self.source!r}")
            idx = node.slice
            if not (isinstance(idx, ast.Constant) and isinstance(idx.value, int)):
                raise ValueError(f"subscript must be an integer literal in {self.source!r}")
            self.names.add("x")
        elif isinstance(node, ast.Call):
            if not (isinstance(node.func, ast.Name) and node.func.id in _FUNCS):
                raise ValueError(f"function not allowed in {self.source!r}")
            if node.keywords:
                raise ValueError(f"keyword arguments not allowed in {self.source!r}")
            for arg in node.args:
                self._check(arg)
        else:
            raise ValueError(f"syntax {type(node).__name__} not allowed in {self.source!r}")

    def __call__(self, s, x):
        # non-finite results are reported by model validation, not as warnings
        with np.errstate(all="ignore"):
            return self._eval(self._tree, s, x)

    def _eval(self, node, s, x):
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](self._eval(node.left, s, x), self._eval(node.right, s, x))
        if isinstance(node, ast.UnaryOp):
            val = self._eval(node.operand, s, x)
            return -val if isinstance(node.op, ast.USub) else val
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id == "s":
                return s
            if node.id == "x":
                return x
            if node.id in self.parameters:
                return float(self.parameters[node.id])
            return _CONSTS[node.id]
        if isinstance(node, ast.Subscript):
            return x[..., node.slice.value]
        return _FUNCS[node.func.id](*(self._eval(a, s, x) for a in node.args))
