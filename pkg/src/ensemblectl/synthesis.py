"""Discretized input-to-state operator and minimum-energy control by truncated SVD.

For a piecewise-constant control on a uniform mesh the operator
``u -> int_0^T exp(-A(beta) s) B(beta) u(s) ds`` becomes a matrix whose
``(beta_i, k)`` block is ``Ad^k Bd`` with ``(Ad, Bd)`` the zero-order-hold
pair of ``-A(beta_i)``. Rows carry square-root quadrature weights and columns
use ``z = sqrt(dt) u``, so Euclidean norms approximate the L2 norms on ``K``
and ``[0, T]``.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NumericRangeError, UnreachableTargetError
from .linalg import zoh_discretize

DEFAULT_TRUNC_REL = 1e-8
RANGE_LIMIT = 1e150


@dataclass(frozen=True, eq=False)
class TimeMesh:
    T: float
    Nt: int

    def __post_init__(self):
        if not (math.isfinite(self.T) and self.T > 0):
            raise InputError(f"horizon T must be positive and finite, got {self.T}")
        if int(self.Nt) != self.Nt or self.Nt < 1:
            raise InputError(f"Nt must be a positive integer, got {self.Nt}")
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "Nt", int(self.Nt))

    @property
    def dt(self):
        return self.T / self.Nt

    @property
    def breakpoints(self):
        return np.linspace(0.0, self.T, self.Nt + 1)

    def refined(self, factor=2):
        return TimeMesh(self.T, self.Nt * factor)


@dataclass(frozen=True, eq=False)
class DiscretizedOperator:
    G: np.ndarray
    grid: object
    mesh: TimeMesh
    n: int
    m: int
    row_weights: np.ndarray
    col_weights: np.ndarray

    def raw(self):
        """Operator without quadrature weights: maps ``u`` values to displacements."""
        return self.G / self.row_weights[:, None] / self.col_weights[None, :]


@dataclass(frozen=True, eq=False)
class ControlSignal:
    mesh: TimeMesh
    values: np.ndarray

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        if v.shape[0] != self.mesh.Nt:
            raise InputError(f"control needs {self.mesh.Nt} interval values, got {v.shape[0]}")
        if not np.all(np.isfinite(v)):
            raise InputError("control values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def m(self):
        return self.values.shape[1]

    def energy(self):
        return float(self.mesh.dt * np.sum(self.values ** 2))

    def __call__(self, t):
        k = np.clip(np.floor(np.asarray(t, dtype=float) / self.mesh.dt).astype(int), 0, self.mesh.Nt - 1)
        return self.values[k]

    def write_csv(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t_start", "t_end"] + [f"u_{j + 1}" for j in range(self.m)])
        tb = self.mesh.breakpoints
        for k in range(self.mesh.Nt):
            w.writerow([repr(float(tb[k])), repr(float(tb[k + 1]))] + [repr(float(x)) for x in self.values[k]])


@dataclass(frozen=True, eq=False)
class SynthesisResult:
    control: ControlSignal
    singular_values: np.ndarray
    truncation_index: int
    output_coefficients: np.ndarray = field(repr=False)
    picard_partials: np.ndarray = field(repr=False)
    predicted_residual: float = 0.0
    energy: float = 0.0
    target_norm: float = 0.0
    trunc_rel: float = DEFAULT_TRUNC_REL

    def summary(self, picard_counts=None):
        counts = picard_counts or _default_counts(self.truncation_index)
        return {
            "truncation_index": self.truncation_index,
            "trunc_rel": self.trunc_rel,
            "energy": self.energy,
            "predicted_residual": self.predicted_residual,
            "target_norm": self.target_norm,
            "singular_values": [float(s) for s in self.singular_values],
            "picard": [{"modes": c, "partial_sum": v} for c, v in picard_diagnostic(self, counts)],
        }


def _default_counts(r):
    counts = sorted({max(1, r // 8), max(1, r // 4), max(1, r // 2), r} - {0})
    return counts or [0]


def _blocks_for(system, beta, mesh):
    Ad, Bd = zoh_discretize(-system.A(beta), system.B(beta), mesh.dt)
    n, m = Bd.shape
    out = np.empty((n, m * mesh.Nt))
    cur = Bd
    for k in range(mesh.Nt):
        out[:, k * m:(k + 1) * m] = cur
        cur = Ad @ cur
    peak = np.max(np.abs(out))
    if not np.isfinite(peak) or peak > RANGE_LIMIT:
        norm = np.linalg.norm(system.A(beta), 2)
        raise NumericRangeError(
            f"operator entries overflow at beta={beta:g}: ||A(beta)|| T = {norm * mesh.T:.3g}")
    return out


def assemble_operator(system, grid, mesh, threads=1):
    """Quadrature-weighted matrix of the input-to-state operator."""
    tol = 1e-12 * max(1.0, abs(system.K.lo), abs(system.K.hi))
    if grid.samples[0] < system.K.lo - tol or grid.samples[-1] > system.K.hi + tol:
        raise InputError("grid leaves the parameter interval K")
    betas = list(grid.samples)
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            rows = list(pool.map(lambda b: _blocks_for(system, b, mesh), betas))
    else:
        rows = [_blocks_for(system, b, mesh) for b in betas]
    raw = np.vstack(rows)
    n, m = system.n, system.m
    row_w = np.repeat(np.sqrt(grid.weights), n)
    col_w = np.full(m * mesh.Nt, 1.0 / math.sqrt(mesh.dt))
    G = raw * row_w[:, None] * col_w[None, :]
    return DiscretizedOperator(G, grid, mesh, n, m, row_w, col_w)


def min_energy_control(op, target, trunc_rel=DEFAULT_TRUNC_REL):
    """Truncated-SVD pseudoinverse solution of ``G z = xi``.

    Modes with ``sigma_n > trunc_rel * sigma_1`` are kept. The returned
    control has the least L2 energy among controls matching the projection
    of the target on the retained output modes.
    """
    if not target.grid.same_as(op.grid):
        raise InputError("target must be sampled on the operator's grid")
    if not 0 < trunc_rel < 1:
        raise InputError(f"trunc_rel must lie in (0, 1), got {trunc_rel}")
    y = (target.values * np.sqrt(op.grid.weights)[:, None]).ravel()
    U, s, Vt = np.linalg.svd(op.G, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        raise UnreachableTargetError("the discretized operator is zero; no direction is reachable")
    r = int(np.sum(s > trunc_rel * s[0]))
    coef = U.T @ y
    z = Vt[:r].T @ (coef[:r] / s[:r])
    resid = float(np.linalg.norm(op.G @ z - y))
    pos = s > 0
    partials = np.cumsum(coef[pos] ** 2 / s[pos] ** 2)
    u = (z * op.col_weights).reshape(op.mesh.Nt, op.m)
    control = ControlSignal(op.mesh, u)
    return SynthesisResult(control, s, r, coef, partials, resid, float(z @ z),
                           float(np.linalg.norm(y)), float(trunc_rel))


def picard_diagnostic(result, fractions):
    """Partial sums ``sum_{n<=N} |<xi, nu_n>|^2 / sigma_n^2`` at the given mode counts."""
    table = []
    total = result.picard_partials
    for count in fractions:
        count = int(count)
        if count < 0:
            raise InputError("mode counts must be nonnegative")
        count = min(count, total.size)
        table.append((count, float(total[count - 1]) if count else 0.0))
    return table


def operator_range_residual(op, target, trunc_rel=DEFAULT_TRUNC_REL):
    """Distance from ``target`` to the retained range, as ``(sup, l2)``.

    ``sup`` is the largest Euclidean error over grid samples; ``l2`` is the
    quadrature-weighted L2 error over ``K``.
    """
    result = min_energy_control(op, target, trunc_rel)
    reached = (op.raw() @ result.control.values.ravel()).reshape(len(op.grid), op.n)
    per = np.linalg.norm(reached - target.values, axis=1)
    return float(np.max(per)), float(math.sqrt(np.sum(op.grid.weights * per ** 2)))
