"""Finite realizations of the reachable set: generator bases, least-squares
reachability residuals, auxiliary functions and polynomial fits.

The reachable directions of ``dX/dt = beta A0 X + B(beta) U`` are spanned by
``(beta A0)^k b_j(beta)``; a target is numerically reachable when a finite
combination of these generators approximates it on a parameter grid.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NumericRangeError, PreconditionError
from .model import EnsembleTarget, Interval, ParameterGrid, make_grid

RANGE_LIMIT = 1e150


@dataclass(frozen=True, eq=False)
class GeneratorBasis:
    """Sampled generators ``(beta A0)^k b_j(beta)``, ordered by ``k`` then ``j``.

    ``vectors`` has shape ``(grid size, n, m*(N+1))``; ``scales`` holds the
    weighted L2 norm of each column (used for normalization).
    """

    grid: ParameterGrid
    order: int
    m: int
    vectors: np.ndarray
    scales: np.ndarray

    @property
    def count(self):
        return self.vectors.shape[2]

    @property
    def labels(self):
        """``(j, k)`` per column, with ``j`` 1-based."""
        return [(j + 1, k) for k in range(self.order + 1) for j in range(self.m)]

    def truncated(self, order):
        """Basis of lower order (a prefix of this one)."""
        if not 0 <= order <= self.order:
            raise InputError(f"order must lie in [0, {self.order}]")
        cols = self.m * (order + 1)
        return GeneratorBasis(self.grid, order, self.m, self.vectors[:, :, :cols], self.scales[:cols])


def build_generators(system, grid, N):
    """Sample the generators up to power ``N`` on ``grid`` by repeated multiplication."""
    if int(N) != N or N < 0:
        raise InputError(f"order N must be a nonnegative integer, got {N}")
    N = int(N)
    n, m = system.n, system.m
    betas = grid.samples
    vectors = np.empty((betas.size, n, m * (N + 1)))
    for i, beta in enumerate(betas):
        v = system.B(beta).astype(float)
        M = beta * system.A0
        for k in range(N + 1):
            if k:
                v = M @ v
            peak = np.max(np.abs(v)) if v.size else 0.0
            if not np.isfinite(peak) or peak > RANGE_LIMIT:
                raise NumericRangeError(
                    f"generator (beta A0)^{k} B overflows at beta={beta:g} "
                    f"(||A0|| = {np.linalg.norm(system.A0, 2):.3g}); use a smaller order N")
            vectors[i, :, k * m:(k + 1) * m] = v
    sq = np.sqrt(grid.weights)[:, None, None]
    scales = np.sqrt(np.sum((vectors * sq) ** 2, axis=(0, 1)))
    return GeneratorBasis(grid, N, m, vectors, scales)


@dataclass(frozen=True, eq=False)
class ReachabilityResult:
    coefficients: np.ndarray
    residual_sup: float
    residual_l2: float
    order: int
    residuals: np.ndarray = field(repr=False)

    def to_dict(self):
        return {"order": self.order, "residual_sup": self.residual_sup, "residual_l2": self.residual_l2}


def _ridge(D, y, reg):
    D = np.vstack([D, math.sqrt(reg) * np.eye(D.shape[1])])
    y = np.concatenate([y, np.zeros(D.shape[1])])
    c, *_ = np.linalg.lstsq(D, y, rcond=None)
    return c, y[: D.shape[0] - D.shape[1]] - D[: -D.shape[1]] @ c


def _ordered_projection(D, y, drop=1e-10):
    """Least squares by Gram-Schmidt in column order.

    A column is skipped when its part outside the span of the earlier ones
    is below ``drop`` relative to its norm. Adding columns can then only
    enlarge the fitted span, so residuals never grow with the order.
    Returns the coefficients and the residual vector.
    """
    rows, cols = D.shape
    Q = np.zeros((rows, cols))
    R = np.zeros((cols, cols))
    kept = []
    for j in range(cols):
        v = D[:, j].copy()
        norm = np.linalg.norm(v)
        if norm == 0:
            continue
        q = Q[:, : len(kept)]
        coef = np.zeros(len(kept))
        for _ in range(2):
            h = q.T @ v
            v -= q @ h
            coef += h
        rest = np.linalg.norm(v)
        if rest <= drop * norm:
            continue
        R[: len(kept), len(kept)] = coef
        R[len(kept), len(kept)] = rest
        Q[:, len(kept)] = v / rest
        kept.append(j)
    r = len(kept)
    c = np.zeros(cols)
    if r == 0:
        return c, y.copy()
    q = Q[:, :r]
    proj = q.T @ y
    c[kept] = np.linalg.solve(np.triu(R[:r, :r]), proj)
    resid = y - q @ proj
    resid -= q @ (q.T @ resid)
    return c, resid


def numeric_reachability_test(basis, target, reg=0.0):
    """Weighted least-squares fit of ``target`` by the generators.

    Coefficients are returned in generator units, shaped ``(N+1, m)``.
    """
    if not basis.grid.same_as(target.grid):
        raise InputError("basis and target must share one parameter grid")
    if reg < 0:
        raise InputError("ridge parameter must be nonnegative")
    nb, n, cols = basis.vectors.shape
    if target.n != n:
        raise InputError(f"target dimension {target.n} differs from system dimension {n}")
    sq = np.sqrt(basis.grid.weights)
    safe = np.where(basis.scales > 0, basis.scales, 1.0)
    D = (basis.vectors / safe[None, None, :] * sq[:, None, None]).reshape(nb * n, cols)
    y = (target.values * sq[:, None]).ravel()
    if reg > 0:
        c, r = _ridge(D, y, reg)
    else:
        c, r = _ordered_projection(D, y)
    c = c / safe
    resid = r.reshape(nb, n) / sq[:, None]
    per_beta = np.linalg.norm(resid, axis=1)
    sup = float(np.max(per_beta))
    l2 = float(math.sqrt(np.sum(basis.grid.weights * per_beta ** 2)))
    return ReachabilityResult(c.reshape(basis.order + 1, basis.m), sup, l2, basis.order, resid)


def residual_table(system, target, orders, reg=0.0):
    """Reachability residuals for several orders from one generator basis."""
    orders = sorted(set(int(o) for o in orders))
    basis = build_generators(system, target.grid, orders[-1])
    return [numeric_reachability_test(basis.truncated(o), target, reg) for o in orders]


def canary_target(system, grid):
    """Generic smooth target ``xi_i(beta) = cos(beta + i)``, ``i = 1..n``."""
    idx = np.arange(1, system.n + 1)
    return EnsembleTarget(grid, np.cos(grid.samples[:, None] + idx[None, :]))


def canary_residual(system, order=30, count=33, scheme="chebyshev"):
    """Reachability residual of :func:`canary_target` as a plain record."""
    grid = make_grid(system.K, count, scheme)
    res = numeric_reachability_test(build_generators(system, grid, order), canary_target(system, grid))
    return {"target": "cos(beta + i)", "order": order, "grid_count": count, "grid_scheme": scheme,
            "residual_sup": res.residual_sup, "residual_l2": res.residual_l2}


# ---------------------------------------------------------------- piecewise functions

@dataclass(frozen=True, eq=False)
class Piece:
    interval: Interval
    tag: str
    func: object = field(repr=False)

    def __call__(self, x):
        return np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float) * np.ones_like(x, dtype=float)


@dataclass(frozen=True, eq=False)
class PiecewiseFunction:
    """Function given by closed-form pieces on intervals with disjoint interiors."""

    pieces: tuple

    def __post_init__(self):
        ps = tuple(sorted(self.pieces, key=lambda p: p.interval.lo))
        for a, b in zip(ps[:-1], ps[1:]):
            if b.interval.lo < a.interval.hi - 1e-12 * max(1.0, abs(a.interval.hi)):
                raise InputError(f"pieces {a.interval.as_list()} and {b.interval.as_list()} overlap")
        object.__setattr__(self, "pieces", ps)

    @property
    def domain(self):
        return [p.interval for p in self.pieces]

    def defined_at(self, x):
        return any(p.interval.contains(x) for p in self.pieces)

    def __call__(self, x):
        """Evaluate; NaN outside the domain. At shared endpoints the later piece wins."""
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, np.nan)
        for p in self.pieces:
            mask = (x >= p.interval.lo) & (x <= p.interval.hi)
            if np.any(mask):
                out[mask] = p(x[mask])
        return out

    def sample(self, density):
        """``(x, piece index, value)`` arrays with about ``density`` points per unit length."""
        xs, ids, vals = [], [], []
        for i, p in enumerate(self.pieces):
            count = max(2, int(round(density * p.interval.length)))
            x = np.linspace(p.interval.lo, p.interval.hi, count)
            xs.append(x)
            ids.append(np.full(count, i))
            vals.append(p(x))
        return np.concatenate(xs), np.concatenate(ids), np.concatenate(vals)

    def write_csv(self, fh, density=100):
        x, ids, v = self.sample(density)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "piece", "value"])
        for xi, i, vi in zip(x, ids, v):
            w.writerow([repr(float(xi)), int(i), repr(float(vi))])


@dataclass(frozen=True)
class PolynomialFit:
    coefficients: np.ndarray
    residual_sup: float
    sample_count: int


def fit_polynomial(g, degree, grid_density=100):
    """Discrete least-squares polynomial fit ``sum c_k x^k`` over samples of the pieces."""
    if int(degree) != degree or degree < 0:
        raise InputError("degree must be a nonnegative integer")
    if not g.pieces:
        raise InputError("cannot fit a function with empty domain")
    x, _, v = g.sample(grid_density)
    if degree >= x.size:
        raise InputError(f"degree {degree} needs more than {x.size} samples")
    V = np.vander(x, int(degree) + 1, increasing=True)
    c, *_ = np.linalg.lstsq(V, v, rcond=None)
    resid = float(np.max(np.abs(V @ c - v)))
    return PolynomialFit(c, resid, x.size)


# ---------------------------------------------------------------- auxiliary functions

def _target_function(target, n):
    """Callable ``beta -> n-vector`` from a callable or a sampled target."""
    if isinstance(target, EnsembleTarget):
        grid, vals = target.grid, target.values

        def fn(beta):
            beta = np.atleast_1d(np.asarray(beta, dtype=float))
            return np.stack([np.interp(beta, grid.samples, vals[:, i]) for i in range(n)], axis=-1)

        return fn

    def fn(beta):
        beta = np.atleast_1d(np.asarray(beta, dtype=float))
        return np.array([np.asarray(target(b), dtype=float).ravel() for b in beta]).reshape(beta.size, n)

    return fn


def _segments(sigmas, tol):
    """All maximal constant-membership segments of the union of spectra (0-based members)."""
    from .controllability import _merge_points

    points = _merge_points([s.lo for s in sigmas] + [s.hi for s in sigmas], tol)
    segs = []
    for a, b in zip(points[:-1], points[1:]):
        members = tuple(j for j, s in enumerate(sigmas) if s.lo <= a + tol and s.hi >= b - tol)
        if not members:
            continue
        if segs and segs[-1][2] == members and abs(segs[-1][1] - a) <= tol:
            segs[-1][1] = b
        else:
            segs.append([a, b, members])
    return segs


def construct_auxiliary_functions(canon, K, target, *, atoms=None, tol=None, atom_tol=None):
    """Auxiliary functions ``g_1..g_m`` whose polynomial approximations reach ``target``.

    ``target`` is a callable ``beta -> xi(beta)`` in original state coordinates
    or an :class:`EnsembleTarget`. Each ``g_j`` is built segment by segment over
    the union of spectra: leading rows fix ``g_l = xi_hat_l``; remaining rows are
    solved for pivot columns chosen by smallest index, and other columns in the
    row support are bridged linearly from adjacent segments (zero if none).
    """
    from .controllability import ATOM_TOL_SCALE, check_diagonal_case, spectra

    K = K if isinstance(K, Interval) else Interval(*K)
    verdict = check_diagonal_case(canon, K, tol, atoms=atoms, atom_tol=atom_tol)
    if not verdict.controllable:
        raise PreconditionError("auxiliary functions exist only for systems passing the diagonal test")
    n, m = canon.n, canon.m
    lambdas = canon.eigenvalues.real
    sigmas = spectra(lambdas, K)
    scale = max(max(abs(s.lo), abs(s.hi)) for s in sigmas)
    seg_tol = ATOM_TOL_SCALE * scale if atom_tol is None else atom_tol
    Bt = canon.Btilde
    xi = _target_function(target, n)
    T = canon.spectral.Pinv[canon.perm].real

    def xi_hat(k):
        lam = lambdas[k]
        return lambda x: xi(np.asarray(x) / lam) @ T[k]

    segs = _segments(sigmas, seg_tol)
    plans = []
    for a, b, members in segs:
        fixed = [l for l in members if l < m]
        rows = [k for k in members if k >= m and np.any(Bt[k] != 0)]
        free = [j for j in range(m) if j not in fixed]
        Mred = Bt[np.ix_(rows, free)] if rows else np.zeros((0, len(free)))
        pivots, rank = [], 0
        for c in range(len(free)):
            trial = pivots + [c]
            r = np.linalg.matrix_rank(Mred[:, trial]) if rows else 0
            if r > rank:
                pivots, rank = trial, r
            if rank == len(rows):
                break
        if rank < len(rows):
            raise PreconditionError(f"local system on [{a:g}, {b:g}] is singular")
        support = [c for c in range(len(free)) if rows and np.any(Mred[:, c] != 0)]
        bridged = [c for c in support if c not in pivots]
        plans.append({"a": a, "b": b, "members": members, "fixed": fixed, "rows": rows, "free": free,
                      "Mred": Mred, "pivots": pivots, "bridged": bridged, "funcs": {}, "tags": {}})

    for plan in plans:
        for l in plan["fixed"]:
            plan["funcs"][l] = xi_hat(l)
            plan["tags"][l] = f"xi_hat[{l + 1}]"

    def neighbour_value(idx, j, side):
        k = idx + side
        if not 0 <= k < len(plans):
            return None
        other = plans[k]
        edge = other["b"] if side < 0 else other["a"]
        here = plans[idx]["a"] if side < 0 else plans[idx]["b"]
        if abs(edge - here) > seg_tol or j not in other["funcs"]:
            return None
        return float(other["funcs"][j](np.array([edge]))[0])

    def solve(idx):
        plan = plans[idx]
        free, rows, Mred = plan["free"], plan["rows"], plan["Mred"]
        for c in plan["bridged"]:
            j = free[c]
            left, right = neighbour_value(idx, j, -1), neighbour_value(idx, j, +1)
            a, b = plan["a"], plan["b"]
            if left is None and right is None:
                f, tag = (lambda x: np.zeros_like(x, dtype=float)), "zero"
            elif left is None or right is None:
                v = left if right is None else right
                f, tag = (lambda x, v=v: np.full_like(x, v, dtype=float)), "bridge-constant"
            else:
                f = (lambda x, a=a, b=b, l=left, r=right: l + (r - l) * (np.asarray(x) - a) / (b - a))
                tag = "bridge-linear"
            plan["funcs"][j], plan["tags"][j] = f, tag
        if not plan["pivots"]:
            return
        Mp = Mred[:, plan["pivots"]]
        Mp_inv = np.linalg.pinv(Mp)
        known = dict(plan["funcs"])
        row_hats = [xi_hat(k) for k in rows]

        def rhs(x):
            x = np.asarray(x, dtype=float)
            r = np.stack([h(x) for h in row_hats])
            for j, f in known.items():
                r = r - np.outer(Bt[rows, j], f(x))
            return Mp_inv @ r

        for pos, c in enumerate(plan["pivots"]):
            j = free[c]
            plan["funcs"][j] = lambda x, pos=pos: rhs(x)[pos]
            plan["tags"][j] = "solve[" + ",".join(str(k + 1) for k in rows) + "]"

    # segments without bridging first, so bridges can read their neighbours
    order = [i for i, p in enumerate(plans) if not p["bridged"]] + [i for i, p in enumerate(plans) if p["bridged"]]
    for idx in order:
        solve(idx)

    out = []
    for j in range(m):
        pieces = [Piece(Interval(p["a"], p["b"]), p["tags"][j], p["funcs"][j]) for p in plans if j in p["funcs"]]
        out.append(PiecewiseFunction(tuple(pieces)))
    return out


def recombine(canon, K, g, x, k):
    """``sum_j Btilde[k, j] g_j(x)``, the value the auxiliary functions produce on spectrum ``k`` (0-based)."""
    x = np.asarray(x, dtype=float)
    total = np.zeros_like(x)
    for j in range(canon.m):
        if canon.Btilde[k, j] != 0:
            total = total + canon.Btilde[k, j] * g[j](x)
    return total
