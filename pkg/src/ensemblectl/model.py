"""Ensemble systems, parameter grids, scenarios and the built-in example registry.

An ensemble system here is ``dX/dt = beta*A0 X + (B0 + beta*B1) U`` with a
scalar parameter ``beta`` ranging over an interval ``K``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError, UnknownExampleError
from .linalg import as_matrix, matrix_exponential

WEIGHT_SUM_TOL = 1e-12


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise InputError(f"interval endpoints must be finite, got [{lo}, {hi}]")
        if not lo < hi:
            raise InputError(f"interval needs lo < hi, got [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def length(self):
        return self.hi - self.lo

    def contains(self, x, tol=0.0):
        return self.lo - tol <= x <= self.hi + tol

    @property
    def crosses_origin(self):
        return self.lo < 0.0 < self.hi

    @property
    def one_signed(self):
        return self.lo > 0.0 or self.hi < 0.0

    def as_list(self):
        return [self.lo, self.hi]


@dataclass(frozen=True, eq=False)
class EnsembleSystem:
    A0: np.ndarray
    B0: np.ndarray
    K: Interval
    B1: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        A0 = as_matrix(self.A0, "A0", square=True)
        B0 = as_matrix(self.B0, "B0")
        if B0.shape[0] != A0.shape[0]:
            raise InputError(f"B0 has {B0.shape[0]} rows, expected {A0.shape[0]}")
        B1 = None
        if self.B1 is not None:
            B1 = as_matrix(self.B1, "B1")
            if B1.shape != B0.shape:
                raise InputError(f"B1 shape {B1.shape} differs from B0 shape {B0.shape}")
            if not np.any(B1):
                B1 = None
        if not np.any(B0) and B1 is None:
            raise InputError("at least one of B0, B1 must be nonzero")
        K = self.K if isinstance(self.K, Interval) else Interval(*self.K)
        object.__setattr__(self, "A0", A0)
        object.__setattr__(self, "B0", B0)
        object.__setattr__(self, "B1", B1)
        object.__setattr__(self, "K", K)

    @property
    def n(self):
        return self.A0.shape[0]

    @property
    def m(self):
        return self.B0.shape[1]

    def A(self, beta):
        return beta * self.A0

    def B(self, beta):
        if self.B1 is None:
            return self.B0
        return self.B0 + beta * self.B1


@dataclass(frozen=True, eq=False)
class ParameterGrid:
    samples: np.ndarray
    weights: np.ndarray
    K: Interval

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if s.shape != w.shape or s.size == 0:
            raise InputError("grid samples and weights must be nonempty and of equal length")
        if np.any(np.diff(s) <= 0):
            raise InputError("grid samples must be strictly increasing")
        if np.any(w <= 0):
            raise InputError("quadrature weights must be positive")
        if s[0] < self.K.lo or s[-1] > self.K.hi:
            raise InputError(f"grid samples leave K = [{self.K.lo}, {self.K.hi}]")
        if abs(w.sum() - self.K.length) > WEIGHT_SUM_TOL * max(1.0, self.K.length):
            raise InputError("quadrature weights must sum to the length of K")
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.samples.size

    def same_as(self, other):
        return (len(self) == len(other) and np.array_equal(self.samples, other.samples)
                and np.array_equal(self.weights, other.weights))


def _clenshaw_curtis(N):
    """Nodes (descending cos) and weights on [-1, 1] for N+1 Chebyshev-Lobatto points."""
    theta = np.pi * np.arange(N + 1) / N
    x = np.cos(theta)
    w = np.zeros(N + 1)
    if N == 1:
        return x, np.array([1.0, 1.0])
    inner = np.arange(1, N)
    v = np.ones(N - 1)
    if N % 2 == 0:
        w[0] = w[N] = 1.0 / (N * N - 1)
        for k in range(1, N // 2):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k * k - 1)
        v -= np.cos(N * theta[inner]) / (N * N - 1)
    else:
        w[0] = w[N] = 1.0 / (N * N)
        for k in range(1, (N - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k * k - 1)
    w[inner] = 2.0 * v / N
    return x, w


def make_grid(K, count, scheme="uniform"):
    """Quadrature grid on ``K`` including both endpoints.

    ``uniform`` uses the trapezoid rule; ``chebyshev`` uses Chebyshev-Lobatto
    nodes with Clenshaw-Curtis weights.
    """
    K = K if isinstance(K, Interval) else Interval(*K)
    if int(count) != count or count < 2:
        raise InputError(f"grid count must be an integer >= 2, got {count}")
    count = int(count)
    if scheme == "uniform":
        s = np.linspace(K.lo, K.hi, count)
        h = K.length / (count - 1)
        w = np.full(count, h)
        w[0] = w[-1] = h / 2.0
    elif scheme == "chebyshev":
        x, w = _clenshaw_curtis(count - 1)
        x, w = x[::-1], w[::-1]
        s = K.lo + (x + 1.0) * (K.length / 2.0)
        s[0], s[-1] = K.lo, K.hi
        w = w * (K.length / 2.0)
        w *= K.length / w.sum()
    else:
        raise InputError(f"unknown grid scheme {scheme!r} (expected 'uniform' or 'chebyshev')")
    return ParameterGrid(s, w, K)


@dataclass(frozen=True, eq=False)
class AffineState:
    """State function ``beta -> const + beta * linear``."""

    const: np.ndarray
    linear: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.const, dtype=float).ravel()
        lin = np.asarray(self.linear, dtype=float).ravel()
        if c.shape != lin.shape:
            raise InputError("state const and linear parts must have equal length")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(lin))):
            raise InputError("state coefficients must be finite")
        object.__setattr__(self, "const", c)
        object.__setattr__(self, "linear", lin)

    @classmethod
    def constant(cls, values):
        values = np.asarray(values, dtype=float).ravel()
        return cls(values, np.zeros_like(values))

    @property
    def n(self):
        return self.const.size

    def __call__(self, beta):
        beta = np.asarray(beta, dtype=float)
        if beta.ndim == 0:
            return self.const + float(beta) * self.linear
        return self.const[None, :] + beta[:, None] * self.linear[None, :]

    def scaled(self, factor):
        return AffineState(factor * self.const, factor * self.linear)


@dataclass(frozen=True, eq=False)
class Scenario:
    system: EnsembleSystem
    X0: AffineState
    XF: AffineState
    T: float

    def __post_init__(self):
        if self.X0.n != self.system.n or self.XF.n != self.system.n:
            raise InputError("initial and target states must match the system dimension")
        if not (self.T >= 0 and math.isfinite(self.T)):
            raise InputError(f"horizon T must be finite and nonnegative, got {self.T}")
        object.__setattr__(self, "T", float(self.T))


@dataclass(frozen=True, eq=False)
class EnsembleTarget:
    grid: ParameterGrid
    values: np.ndarray = field()

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != len(self.grid):
            raise InputError(f"target needs one vector per grid sample, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InputError("target values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def n(self):
        return self.values.shape[1]

    @classmethod
    def from_function(cls, grid, fn):
        return cls(grid, np.array([np.asarray(fn(b), dtype=float).ravel() for b in grid.samples]))


def _check_grid_in(grid, K):
    tol = 1e-12 * max(1.0, abs(K.lo), abs(K.hi))
    if grid.samples[0] < K.lo - tol or grid.samples[-1] > K.hi + tol:
        raise InputError(f"grid [{grid.samples[0]}, {grid.samples[-1]}] leaves K = [{K.lo}, {K.hi}]")


def transition_back(system, beta, T):
    """``Phi(0, T, beta) = exp(-A(beta) T)``."""
    return matrix_exponential(-system.A(beta) * T)


def compute_xi(scenario, grid):
    """Ensemble displacement ``Phi(0,T,beta) XF(beta) - X0(beta)`` on the grid."""
    system = scenario.system
    _check_grid_in(grid, system.K)
    values = np.empty((len(grid), system.n))
    for i, beta in enumerate(grid.samples):
        xf = scenario.XF(beta)
        if scenario.T > 0:
            xf = transition_back(system, beta, scenario.T) @ xf
        values[i] = xf - scenario.X0(beta)
    return EnsembleTarget(grid, values)


# ---------------------------------------------------------------- registry

_ROTATION = [[0.0, -1.0], [1.0, 0.0]]
_DIAG4_B = [[1.0, 0.0], [0.0, 1.0], [1.0, 2.0], [1.0, 0.0]]


def _harmonic(nu=1.0):
    return EnsembleSystem(_ROTATION, np.eye(2), Interval(-nu, nu), name="harmonic")


def _harmonic_single(nu=1.0):
    return EnsembleSystem(_ROTATION, [[1.0], [0.0]], Interval(-nu, nu), name="harmonic-single-input")


def _aircraft_ex2():
    A = [[0.0, 0.1, -1.0], [10.0, 0.1, 0.0], [4.0, 0.0, 0.1]]
    return EnsembleSystem(A, np.eye(3), Interval(0.8, 1.2), name="aircraft-ex2")


def _aircraft_ex3():
    A = [[0.0, 0.1, 0.0], [0.0, 0.0, 1.0], [4.0, 0.0, 0.0]]
    return EnsembleSystem(A, [[1.0], [0.0], [0.0]], Interval(0.8, 1.2), name="aircraft-ex3")


def _motivating(a=0.5):
    return EnsembleSystem(np.diag([1.0, 2.0, a]), [[1.0, 0.0], [0.0, 1.0], [1.0, 2.0]],
                          Interval(1.0, 3.0), name="motivating")


def _diag4(alpha=0.4):
    return EnsembleSystem(np.diag([1.0, 6.0, alpha, 2.5]), _DIAG4_B, Interval(1.0, 2.0), name="diag4")


def _jordan4(alpha=4.0):
    J = [[1.0, 0.0, 0.0, 0.0], [0.0, alpha, 0.0, 0.0], [0.0, 0.0, 2.0, 1.0], [0.0, 0.0, 0.0, 2.0]]
    return EnsembleSystem(J, _DIAG4_B, Interval(1.0, 1.5), name="jordan4")


def _fig2():
    return Scenario(_harmonic(1.0), AffineState([5.0, 3.0], [-2.0, 0.0]),
                    AffineState([0.0, 0.0], [1.0, 2.0]), 1.0)


def _fig3():
    A = [[0.0, 0.5, 1.0], [2.0, 0.5, 0.0], [0.5, 0.0, 0.5]]
    B = [[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]]
    system = EnsembleSystem(A, B, Interval(0.8, 1.2), name="aircraft-fig3")
    return Scenario(system, AffineState.constant([2 * math.pi, 6.0, 4.0]),
                    AffineState([0.0, 0.0, 0.0], [math.pi, 1.0, 0.0]), 4.0)


def _fig4():
    A = [[0.0, 1.0, 0.0], [-1.0, 0.0, 1.0], [0.0, 0.0, 0.0]]
    system = EnsembleSystem(A, np.zeros((3, 1)), Interval(0.5, 1.0), B1=[[0.0], [0.0], [1.0]],
                            name="transport")
    return Scenario(system, AffineState.constant([0.0, 0.0, 0.0]),
                    AffineState([0.0, 0.0, 0.0], [1.0, 0.0, 1.0]), 25.0)


BUILTINS = {
    "harmonic": (_harmonic, {"nu": 1.0}),
    "harmonic-single-input": (_harmonic_single, {"nu": 1.0}),
    "aircraft-ex2": (_aircraft_ex2, {}),
    "aircraft-ex3": (_aircraft_ex3, {}),
    "motivating": (_motivating, {"a": 0.5}),
    "diag4": (_diag4, {"alpha": 0.4}),
    "jordan4": (_jordan4, {"alpha": 4.0}),
    "fig2": (_fig2, {}),
    "fig3": (_fig3, {}),
    "fig4": (_fig4, {}),
}


def builtin_example(name, **params):
    """Return the named built-in system or scenario.

    ``motivating`` takes ``a``; ``diag4`` and ``jordan4`` take ``alpha``;
    the harmonic systems take the half-width ``nu`` of K = [-nu, nu].
    """
    try:
        factory, defaults = BUILTINS[name]
    except KeyError:
        raise UnknownExampleError(f"unknown example {name!r}; valid names: {', '.join(BUILTINS)}") from None
    unknown = set(params) - set(defaults)
    if unknown:
        raise InputError(f"example {name!r} does not take parameter(s) {sorted(unknown)}")
    kwargs = {**defaults, **{k: float(v) for k, v in params.items()}}
    return factory(**kwargs)


def system_of(obj):
    return obj.system if isinstance(obj, Scenario) else obj


# ---------------------------------------------------------------- JSON files

def _flat(M):
    return [float(x) for x in np.asarray(M, dtype=float).ravel()]


def to_document(obj):
    """Scenario or system as a plain dict following the file schema."""
    system = system_of(obj)
    doc = {
        "n": system.n,
        "m": system.m,
        "A0": _flat(system.A0),
        "B0": _flat(system.B0),
    }
    if system.B1 is not None:
        doc["B1"] = _flat(system.B1)
    doc["K"] = {"lo": system.K.lo, "hi": system.K.hi}
    if isinstance(obj, Scenario):
        doc["X0"] = {"const": _flat(obj.X0.const), "linear": _flat(obj.X0.linear)}
        doc["XF"] = {"const": _flat(obj.XF.const), "linear": _flat(obj.XF.linear)}
        doc["T"] = obj.T
    return doc


def _read_matrix(doc, key, rows, cols):
    raw = np.asarray(doc[key], dtype=float)
    if raw.size != rows * cols:
        raise InputError(f"{key}: expected {rows * cols} entries, got {raw.size}")
    return raw.reshape(rows, cols)


def _read_state(doc, key, n):
    part = doc[key]
    const = np.asarray(part.get("const", [0.0] * n), dtype=float)
    linear = np.asarray(part.get("linear", [0.0] * n), dtype=float)
    if const.size != n or linear.size != n:
        raise InputError(f"{key}: const and linear must each have {n} entries")
    return AffineState(const, linear)


def from_document(doc):
    """Inverse of :func:`to_document`; returns a Scenario when X0, XF, T are present."""
    try:
        n, m = int(doc["n"]), int(doc["m"])
        A0 = _read_matrix(doc, "A0", n, n)
        B0 = _read_matrix(doc, "B0", n, m)
        B1 = _read_matrix(doc, "B1", n, m) if doc.get("B1") is not None else None
        K = Interval(doc["K"]["lo"], doc["K"]["hi"])
        system = EnsembleSystem(A0, B0, K, B1=B1, name=str(doc.get("name", "")))
        if all(k in doc for k in ("X0", "XF", "T")):
            return Scenario(system, _read_state(doc, "X0", n), _read_state(doc, "XF", n), float(doc["T"]))
        return system
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"malformed system document: {exc!r}") from None


def load_document(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    try:
        return from_document(json.loads(text))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
