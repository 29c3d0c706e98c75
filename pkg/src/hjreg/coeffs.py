"""Problem data: coefficient expressions, problem documents, hypothesis checks.

Coefficients ``b``, ``f`` and ``g`` are written as small arithmetic
expressions over ``x1..xN`` and ``t``::

    "0.8 + 0.1*sin(2*x1 + t)"
    "min(abs(x1), 1)"
    "x1^2 / (1 + x1^2)"

``^`` is exponentiation. Allowed functions are sin, cos, exp, abs, min, max
and sqrt; ``pi`` and ``e`` are predefined constants. Expressions are parsed
once into a tree of numpy closures, so a field can be evaluated on whole
grids at once.
"""

from __future__ import annotations

import ast
import json
import math
import operator
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .errors import (
    DomainError,
    ExpressionSyntaxError,
    RangeError,
    SchemaError,
    UnknownIdentifierError,
)

__all__ = [
    "CoefficientField",
    "ProblemSpec",
    "BoundsReport",
    "parse_expression",
    "parse_problem",
    "eval_field",
    "validate_bounds",
]

_Env = dict  # variable name -> float or ndarray
_Node = Callable[[_Env], Any]

_CONSTANTS = {"pi": math.pi, "e": math.e}


def _checked_div(a, b):
    if np.any(np.asarray(b) == 0):
        raise DomainError("division by zero")
    return np.true_divide(a, b)


def _checked_sqrt(a):
    if np.any(np.asarray(a) < 0):
        raise DomainError("sqrt of a negative number")
    return np.sqrt(a)


def _checked_pow(a, b):
    with np.errstate(all="ignore"):
        out = np.power(np.asarray(a, dtype=float), b)
    if not np.all(np.isfinite(out)):
        raise DomainError("power undefined (negative base with fractional exponent, or 0 to a negative power)")
    return out


def _checked_exp(a):
    with np.errstate(over="ignore"):
        out = np.exp(a)
    if not np.all(np.isfinite(out)):
        raise DomainError("exp overflow")
    return out


def _fold(fn):
    def call(*args):
        out = args[0]
        for a in args[1:]:
            out = fn(out, a)
        return out

    return call


# name -> (callable, min arity, max arity)
_FUNCTIONS: dict[str, tuple[Callable, int, int | None]] = {
    "sin": (np.sin, 1, 1),
    "cos": (np.cos, 1, 1),
    "exp": (_checked_exp, 1, 1),
    "abs": (np.abs, 1, 1),
    "sqrt": (_checked_sqrt, 1, 1),
    "min": (_fold(np.minimum), 2, None),
    "max": (_fold(np.maximum), 2, None),
}

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: _checked_div,
    ast.Pow: _checked_pow,
}


def _compile(node: ast.AST, variables: frozenset[str]) -> _Node:
    if isinstance(node, ast.Expression):
        return _compile(node.body, variables)
    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ExpressionSyntaxError(f"unsupported literal {node.value!r}")
        value = float(node.value)
        return lambda env: value
    if isinstance(node, ast.Name):
        name = node.id
        if name in _CONSTANTS:
            value = _CONSTANTS[name]
            return lambda env: value
        if name not in variables:
            raise UnknownIdentifierError(f"unknown identifier {name!r}")
        return lambda env: env[name]
    if isinstance(node, ast.UnaryOp):
        inner = _compile(node.operand, variables)
        if isinstance(node.op, ast.USub):
            return lambda env: -inner(env)
        if isinstance(node.op, ast.UAdd):
            return inner
        raise ExpressionSyntaxError(f"unsupported unary operator {type(node.op).__name__}")
    if isinstance(node, ast.BinOp):
        op = _BINOPS.get(type(node.op))
        if op is None:
            raise ExpressionSyntaxError(f"unsupported operator {type(node.op).__name__}")
        left = _compile(node.left, variables)
        right = _compile(node.right, variables)
        return lambda env: op(left(env), right(env))
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.keywords:
            raise ExpressionSyntaxError("only plain function calls are allowed")
        name = node.func.id
        if name not in _FUNCTIONS:
            raise UnknownIdentifierError(f"unknown function {name!r}")
        fn, lo, hi = _FUNCTIONS[name]
        n = len(node.args)
        if n < lo or (hi is not None and n > hi):
            raise ExpressionSyntaxError(f"{name}() takes {lo}{'+' if hi is None else ''} argument(s), got {n}")
        args = [_compile(a, variables) for a in node.args]
        return lambda env: fn(*(a(env) for a in args))
    raise ExpressionSyntaxError(f"unsupported syntax: {type(node).__name__}")


def _variables(dimension: int) -> frozenset[str]:
    return frozenset([f"x{i + 1}" for i in range(dimension)] + ["t"])


def parse_expression(text: str, dimension: int) -> _Node:
    """Compile ``text`` into a callable taking a variable environment."""
    if not isinstance(text, str) or not text.strip():
        raise ExpressionSyntaxError("empty expression")
    try:
        tree = ast.parse(text.strip().replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ExpressionSyntaxError(f"cannot parse {text!r}: {exc.msg}") from None
    return _compile(tree, _variables(dimension))


@dataclass(frozen=True)
class CoefficientField:
    """A scalar or vector field over ``R^N x [0, T]`` given by expressions."""

    kind: str
    dimension: int
    sources: tuple[str, ...]
    _nodes: tuple[_Node, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("scalar", "vector"):
            raise SchemaError(f"kind must be 'scalar' or 'vector', got {self.kind!r}")
        if self.dimension < 1:
            raise SchemaError("dimension must be positive")
        if self.kind == "scalar" and len(self.sources) != 1:
            raise SchemaError("scalar field needs exactly one expression")
        if self.kind == "vector" and len(self.sources) != self.dimension:
            raise SchemaError(
                f"vector field needs {self.dimension} component expressions, got {len(self.sources)}"
            )
        nodes = tuple(parse_expression(s, self.dimension) for s in self.sources)
        object.__setattr__(self, "_nodes", nodes)

    @classmethod
    def scalar(cls, text: str, dimension: int) -> "CoefficientField":
        return cls("scalar", dimension, (text,))

    @classmethod
    def vector(cls, texts: Sequence[str], dimension: int) -> "CoefficientField":
        return cls("vector", dimension, tuple(texts))

    @property
    def is_constant(self) -> bool:
        """True when no expression references a variable."""
        names = _variables(self.dimension)
        for s in self.sources:
            tree = ast.parse(s.replace("^", "**"), mode="eval")
            if any(isinstance(n, ast.Name) and n.id in names for n in ast.walk(tree)):
                return False
        return True

    def __call__(self, x, t):
        return eval_field(self, x, t)


def eval_field(field: CoefficientField, x, t):
    """Evaluate ``field`` at points ``x`` (shape ``(N,)`` or ``(..., N)``) and time ``t``.

    Scalar fields return an array of shape ``x.shape[:-1]`` (a float for a
    single point); vector fields append a trailing axis of length N.
    """
    xa = np.asarray(x, dtype=float)
    if xa.ndim == 0:
        xa = xa.reshape(1)
    if xa.shape[-1] != field.dimension:
        raise SchemaError(f"point dimension {xa.shape[-1]} does not match field dimension {field.dimension}")
    shape = xa.shape[:-1]
    env: dict[str, Any] = {f"x{i + 1}": xa[..., i] for i in range(field.dimension)}
    env["t"] = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        parts = [np.broadcast_to(np.asarray(node(env), dtype=float), shape) for node in field._nodes]
    for part in parts:
        if not np.all(np.isfinite(part)):
            raise DomainError("expression evaluated to a non-finite value")
    if field.kind == "scalar":
        out = np.array(parts[0])
        return float(out) if out.ndim == 0 else out
    return np.stack(parts, axis=-1)


@dataclass(frozen=True)
class ProblemSpec:
    """Data of ``-u_t + b|Du|^q + f.Du = 0``, ``u(., T) = g``, plus declared bounds.

    ``box`` is the core domain where the value function is reported;
    solvers work on ``box`` enlarged by ``margin`` on every side.
    """

    dimension: int
    q: float
    T: float
    b: CoefficientField
    f: CoefficientField
    g: CoefficientField
    M: float
    delta: float
    box: tuple[tuple[float, float], ...]
    margin: float

    @property
    def p(self) -> float:
        return self.q / (self.q - 1.0)

    @property
    def enlarged_box(self) -> tuple[tuple[float, float], ...]:
        return tuple((lo - self.margin, hi + self.margin) for lo, hi in self.box)

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "q": self.q,
            "T": self.T,
            "b": self.b.sources[0],
            "f": list(self.f.sources),
            "g": self.g.sources[0],
            "M": self.M,
            "delta": self.delta,
            "box": [list(ab) for ab in self.box],
            "margin": self.margin,
        }

    def replace(self, **changes) -> "ProblemSpec":
        d = self.to_dict()
        d.update(changes)
        if "margin" not in changes:
            d.pop("margin")
        return ProblemSpec.from_dict(d)

    @classmethod
    def from_dict(cls, doc: dict) -> "ProblemSpec":
        if not isinstance(doc, dict):
            raise SchemaError("problem document must be a JSON object")
        required = ("dimension", "q", "T", "b", "f", "g", "M", "delta", "box")
        missing = [k for k in required if k not in doc]
        if missing:
            raise SchemaError(f"missing field(s): {', '.join(missing)}")

        dim = doc["dimension"]
        if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
            raise SchemaError("dimension must be a positive integer")
        nums = {}
        for key in ("q", "T", "M", "delta"):
            v = doc[key]
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise SchemaError(f"{key} must be a number")
            nums[key] = float(v)
        if not nums["q"] > 1.0:
            raise RangeError(f"q must exceed 1, got {nums['q']}")
        if not nums["T"] > 0.0:
            raise RangeError(f"T must be positive, got {nums['T']}")
        if not nums["M"] > 0.0 or not nums["delta"] > 0.0:
            raise RangeError("M and delta must be positive")

        if not isinstance(doc["b"], str) or not isinstance(doc["g"], str):
            raise SchemaError("b and g must be expression strings")
        if not isinstance(doc["f"], list) or not all(isinstance(s, str) for s in doc["f"]):
            raise SchemaError("f must be a list of expression strings")
        if len(doc["f"]) != dim:
            raise SchemaError(f"f needs {dim} components, got {len(doc['f'])}")
        box = doc["box"]
        if not isinstance(box, list) or len(box) != dim:
            raise SchemaError(f"box needs {dim} [lo, hi] pairs")
        pairs = []
        for ab in box:
            if not isinstance(ab, (list, tuple)) or len(ab) != 2:
                raise SchemaError("box entries must be [lo, hi] pairs")
            lo, hi = float(ab[0]), float(ab[1])
            if not lo < hi:
                raise RangeError(f"box axis [{lo}, {hi}] is empty")
            pairs.append((lo, hi))

        spec = cls(
            dimension=dim,
            q=nums["q"],
            T=nums["T"],
            b=CoefficientField.scalar(doc["b"], dim),
            f=CoefficientField.vector(doc["f"], dim),
            g=CoefficientField.scalar(doc["g"], dim),
            M=nums["M"],
            delta=nums["delta"],
            box=tuple(pairs),
            margin=0.0,
        )
        # conjugate exponent sanity
        assert abs(1.0 / spec.p + 1.0 / spec.q - 1.0) <= 1e-12

        from .exponents import required_margin

        need = required_margin(spec)
        if doc.get("margin") is None:
            margin = need
        else:
            v = doc["margin"]
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise SchemaError("margin must be a number")
            margin = float(v)
            if margin < need * (1.0 - 1e-12):
                raise RangeError(f"margin {margin} is below the trajectory bound {need}")
        return cls(**{**spec.__dict__, "margin": margin})


def parse_problem(text: str) -> ProblemSpec:
    """Parse a JSON problem document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from None
    return ProblemSpec.from_dict(doc)


@dataclass(frozen=True)
class BoundsReport:
    M_observed: float
    delta_observed: float
    b_min: float
    b_max: float
    passed: bool
    failures: tuple[str, ...] = ()


def _sample_grid(box, samples: int) -> np.ndarray:
    axes = [np.linspace(lo, hi, samples) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def validate_bounds(spec: ProblemSpec, samples_per_axis: int = 64) -> BoundsReport:
    """Check ``|b|, |f|, |g| <= M`` and ``b >= delta`` on a dense sample grid.

    Sampling covers ``spec.box x [0, T]`` with ``samples_per_axis`` points per
    axis (time included). The report is advisory.
    """
    if samples_per_axis < 2:
        raise RangeError("samples_per_axis must be at least 2")
    pts = _sample_grid(spec.box, samples_per_axis)
    times = np.linspace(0.0, spec.T, samples_per_axis)
    b_min, b_max, f_max = math.inf, -math.inf, 0.0
    for t in times:
        bv = eval_field(spec.b, pts, t)
        fv = eval_field(spec.f, pts, t)
        b_min = min(b_min, float(np.min(bv)))
        b_max = max(b_max, float(np.max(bv)))
        f_max = max(f_max, float(np.max(np.linalg.norm(fv, axis=-1))))
    g_max = float(np.max(np.abs(eval_field(spec.g, pts, spec.T))))
    b_abs = max(abs(b_min), abs(b_max))
    m_obs = max(b_abs, f_max, g_max)

    failures = []
    if b_abs > spec.M:
        failures.append(f"sup|b| = {b_abs:.6g} exceeds M = {spec.M:.6g}")
    if f_max > spec.M:
        failures.append(f"sup|f| = {f_max:.6g} exceeds M = {spec.M:.6g}")
    if g_max > spec.M:
        failures.append(f"sup|g| = {g_max:.6g} exceeds M = {spec.M:.6g}")
    if b_min < spec.delta:
        failures.append(f"inf b = {b_min:.6g} is below delta = {spec.delta:.6g}")
    return BoundsReport(m_obs, b_min, b_min, b_max, not failures, tuple(failures))
