"""Algebraic ensemble-controllability tests.

Entry point is :func:`classify`, which routes a system to one of

* the origin-interval rank test (``0`` inside ``K``),
* the full-rank sufficiency shortcut for one-signed ``K``,
* the spectral-atom test for real diagonalizable drift,
* the Jordan-block test for real defective drift,
* an inconclusive report for complex spectra, optionally with a numeric
  reachability residual attached.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import IllConditionedError, InputError, PreconditionError, RoutingError, UnsupportedError
from .linalg import DEFAULT_RANK_SCALE, SpectralForm, as_matrix, numeric_rank, spectral_decompose
from .model import EnsembleSystem, Interval

CONTROLLABLE = "controllable"
UNCONTROLLABLE = "uncontrollable"
INCONCLUSIVE = "inconclusive"

ROUTE_ORIGIN = "origin-interval rank test"
ROUTE_SUFFICIENT = "full-rank sufficiency, one-signed K"
ROUTE_SINGULAR = "singular drift, one-signed K"
ROUTE_ZERO_ROW = "zero input row"
ROUTE_DIAGONAL = "spectral atoms (diagonal, real)"
ROUTE_JORDAN = "jordan blocks"
ROUTE_COMPLEX = "complex spectrum"

DEFAULT_TOL = 1e-10
ATOM_TOL_SCALE = 1e-9


def _default_rank_tol(M, tol):
    return DEFAULT_RANK_SCALE * max(M.shape) if tol is None else tol


def _rows(M):
    return [[float(x) for x in row] for row in np.atleast_2d(M)]


@dataclass(frozen=True)
class Evidence:
    condition: str
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return {"condition": self.condition, "passed": self.passed, **self.details}


@dataclass(frozen=True)
class Verdict:
    status: str
    route: str
    evidence: tuple = ()
    notes: tuple = ()

    def __post_init__(self):
        if self.status not in (CONTROLLABLE, UNCONTROLLABLE, INCONCLUSIVE):
            raise ValueError(f"bad verdict status {self.status!r}")
        object.__setattr__(self, "evidence", tuple(self.evidence))
        object.__setattr__(self, "notes", tuple(self.notes))
        if self.status == UNCONTROLLABLE and not any(not e.passed for e in self.evidence):
            raise ValueError("uncontrollable verdict needs a failed evidence record")

    @property
    def controllable(self):
        return self.status == CONTROLLABLE

    def failures(self):
        return [e for e in self.evidence if not e.passed]

    def find(self, condition):
        return [e for e in self.evidence if e.condition == condition]

    def to_dict(self):
        return {
            "status": self.status,
            "route": self.route,
            "evidence": [e.to_dict() for e in self.evidence],
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class SpectrumAtom:
    """Maximal interval on which the set of covering spectra is constant.

    ``membership`` holds 1-based spectrum indices.
    """

    interval: Interval
    membership: tuple

    def __post_init__(self):
        object.__setattr__(self, "membership", tuple(sorted(int(i) for i in self.membership)))

    @property
    def coverage(self):
        return len(self.membership)

    def to_dict(self):
        return {"interval": self.interval.as_list(), "membership": list(self.membership)}


@dataclass(frozen=True, eq=False)
class CanonicalSystem:
    """Drift in spectral form with input rows normalized to a leading identity.

    ``perm`` lists original spectral-coordinate indices (0-based) in their
    canonical order; ``Btilde = (P^-1 B)[perm] @ inv(B0)`` where ``B0`` is the
    leading m-row block of ``(P^-1 B)[perm]``. ``PinvB`` is kept in
    unpermuted spectral order for the Jordan block test.
    """

    spectral: SpectralForm
    Btilde: np.ndarray
    perm: np.ndarray
    B0: np.ndarray
    B0inv: np.ndarray
    PinvB: np.ndarray
    kept_columns: tuple = ()

    @property
    def n(self):
        return self.Btilde.shape[0]

    @property
    def m(self):
        return self.Btilde.shape[1]

    @property
    def eigenvalues(self):
        """Eigenvalues in canonical (permuted) order."""
        return self.spectral.eigenvalues[self.perm]

    @property
    def permutation(self):
        return tuple(int(i) + 1 for i in self.perm)


# ---------------------------------------------------------------- helpers

def reduce_columns(B, tol=None):
    """Keep a maximal independent set of columns, scanning left to right.

    Returns the reduced matrix and the kept (0-based) column indices.
    """
    B = as_matrix(B, "B")
    scale = np.max(np.abs(B)) if B.size else 0.0
    if scale == 0.0:
        return B[:, :0].copy(), ()
    thr = _default_rank_tol(B, tol) * np.linalg.norm(B, 2)
    kept, Q = [], np.zeros((B.shape[0], 0))
    for j in range(B.shape[1]):
        col = B[:, j]
        resid = col - Q @ (Q.T @ col)
        resid = resid - Q @ (Q.T @ resid)
        nr = np.linalg.norm(resid)
        if nr > thr:
            kept.append(j)
            Q = np.hstack([Q, (resid / nr)[:, None]])
    return B[:, kept].copy(), tuple(kept)


def _left_null_vector(M, tol):
    """Unit ``a`` with ``a^T M ~ 0`` (the row-dependence coefficients), sign-fixed."""
    U, s, _ = np.linalg.svd(M)
    rank = int(np.sum(s > tol * (s[0] if s.size else 0.0))) if s.size else 0
    if rank >= M.shape[0]:
        return None
    a = U[:, -1].real
    nz = np.flatnonzero(np.abs(a) > 1e-12)
    if nz.size and a[nz[0]] < 0:
        a = -a
    return a


def _check_one_signed(K):
    if K.lo == 0.0 or K.hi == 0.0:
        raise InputError("K touches zero at an endpoint; neither parameter regime covers this case")


# ---------------------------------------------------------------- origin case

def check_origin_case(system, tol=None):
    """Rank test for ``0`` in the interior of ``K``: controllable iff rank A0 = rank B0 = n."""
    if system.B1 is not None:
        raise RoutingError("parameter-dependent input matrix; use numeric reachability instead")
    if not system.K.crosses_origin:
        raise RoutingError("K does not contain 0 in its interior; use the one-signed analysis")
    n = system.n
    rA = numeric_rank(system.A0, tol)
    rB = numeric_rank(system.B0, tol)
    ev = [
        Evidence("rank(A0) = n", rA == n, {"rank": rA, "n": n}),
        Evidence("rank(B0) = n", rB == n, {"rank": rB, "n": n}),
    ]
    status = CONTROLLABLE if rA == n and rB == n else UNCONTROLLABLE
    return Verdict(status, ROUTE_ORIGIN, ev)


# ---------------------------------------------------------------- canonical form

def _select_rows(M):
    """Pick m rows of ``M`` whose square block has a large smallest singular value."""
    n, m = M.shape

    def smin(rows):
        return np.linalg.svd(M[list(rows)], compute_uv=False)[-1]

    chosen = []
    for _ in range(m):
        best, best_val = None, -1.0
        for r in range(n):
            if r in chosen:
                continue
            val = np.linalg.svd(M[chosen + [r]], compute_uv=False)[-1]
            if val > best_val * (1 + 1e-12):
                best, best_val = r, val
        chosen.append(best)
    chosen.sort()
    natural = list(range(m))
    if smin(natural) >= smin(chosen) * (1 - 1e-12):
        return natural, smin(natural)
    return chosen, smin(chosen)


def canonicalize(system, tol=None, *, spectral=None, tol_cluster=None, reject_zero_rows=True):
    """Spectral form of ``A0`` with the input matrix normalized to a leading identity.

    Returns an uncontrollable :class:`Verdict` instead when ``P^-1 B0`` has a
    zero row (a mode no control reaches), unless ``reject_zero_rows`` is false.
    """
    if system.B1 is not None:
        raise RoutingError("parameter-dependent input matrix; use numeric reachability instead")
    B = system.B0
    m = B.shape[1]
    if numeric_rank(B, tol) != m:
        raise PreconditionError("B0 has dependent columns; apply reduce_columns first")
    sf = spectral if spectral is not None else spectral_decompose(system.A0, tol_cluster)
    PinvB = sf.Pinv @ B
    if sf.is_real and np.iscomplexobj(PinvB):
        PinvB = PinvB.real
    rel = DEFAULT_TOL if tol is None else tol
    thr = rel * np.max(np.abs(PinvB))
    zero_rows = [i for i in range(PinvB.shape[0]) if np.all(np.abs(PinvB[i]) <= thr)]
    if zero_rows and reject_zero_rows:
        ev = [Evidence("every mode receives input", False,
                       {"zero_rows": [i + 1 for i in zero_rows], "PinvB": _rows(np.abs(PinvB))})]
        return Verdict(UNCONTROLLABLE, ROUTE_ZERO_ROW, ev)
    lead, smin = _select_rows(PinvB)
    if smin <= rel * np.linalg.norm(PinvB, 2):
        raise IllConditionedError("no invertible set of leading input rows", estimate=smin)
    rest = [i for i in range(PinvB.shape[0]) if i not in lead]
    perm = np.array(lead + rest, dtype=int)
    B0 = PinvB[lead]
    B0inv = np.linalg.inv(B0)
    Bt = PinvB[perm] @ B0inv
    Bt[:m] = np.eye(m)
    # round-off below the zero-row threshold becomes an exact zero
    Bt[np.abs(Bt) <= rel * np.max(np.abs(Bt))] = 0.0
    return CanonicalSystem(sf, Bt, perm, B0, B0inv, PinvB)


# ---------------------------------------------------------------- spectra and atoms

def spectra(spectral, K):
    """Intervals ``lambda_i * K`` for real, nonzero eigenvalues."""
    eig = spectral.eigenvalues if isinstance(spectral, SpectralForm) else np.asarray(spectral)
    K = K if isinstance(K, Interval) else Interval(*K)
    if not K.one_signed:
        raise RoutingError("spectra are defined for one-signed K only")
    out = []
    for lam in eig:
        if abs(np.imag(lam)) > 0:
            raise RoutingError("complex eigenvalue; the spectral-atom test does not apply")
        lam = float(np.real(lam))
        if lam == 0.0:
            raise RoutingError("zero eigenvalue; the drift is singular")
        a, b = lam * K.lo, lam * K.hi
        out.append(Interval(min(a, b), max(a, b)))
    return out


def _merge_points(points, tol):
    pts = sorted(points)
    merged = [pts[0]]
    for p in pts[1:]:
        if p - merged[-1] > tol:
            merged.append(p)
    return merged


def build_atoms(sigmas, tol=None):
    """Sweep-line construction of the maximal constant-membership overlaps.

    Endpoints within ``tol`` are identified; spectra touching at one point
    do not overlap.
    """
    if not sigmas:
        raise InputError("need at least one spectrum interval")
    scale = max(max(abs(s.lo), abs(s.hi)) for s in sigmas)
    tol = ATOM_TOL_SCALE * scale if tol is None else float(tol)
    points = _merge_points([s.lo for s in sigmas] + [s.hi for s in sigmas], tol)
    segments = []
    for a, b in zip(points[:-1], points[1:]):
        members = tuple(j + 1 for j, s in enumerate(sigmas) if s.lo <= a + tol and s.hi >= b - tol)
        if segments and segments[-1][2] == members:
            segments[-1][1] = b
        else:
            segments.append([a, b, members])
    return [SpectrumAtom(Interval(a, b), mem) for a, b, mem in segments if len(mem) >= 2]


# ---------------------------------------------------------------- diagonal case

def _diagonal_test(lambdas, Bt, m, K, tol, atoms=None, atom_tol=None):
    n = Bt.shape[0]
    rel = DEFAULT_TOL if tol is None else tol
    thr = rel * np.max(np.abs(Bt))
    evidence = []
    S = {k: [j + 1 for j in range(m) if abs(Bt[k, j]) > thr] for k in range(m, n)}
    empty = [k + 1 for k, s in S.items() if not s]
    evidence.append(Evidence("S_k nonempty for k > m", not empty,
                             {"S": {str(k + 1): s for k, s in S.items()}, "empty": empty}))
    if atoms is None:
        atoms = build_atoms(spectra(lambdas, K), atom_tol)
    coupled = [a for a in atoms if max(a.membership) > m]
    ok_all = not empty
    for atom in coupled:
        rows = [i - 1 for i in atom.membership]
        M = Bt[rows]
        keep = [r for r, row in zip(rows, M) if np.any(np.abs(row) > thr)]
        Mbar = Bt[keep]
        p = len(keep)
        r = numeric_rank(Mbar, tol) if p else 0
        ok = p <= m and r == p
        details = {"atom": atom.to_dict(), "rows": [i + 1 for i in keep], "Mbar": _rows(Mbar),
                   "p": p, "m": m, "rank": r}
        if not ok:
            a = _left_null_vector(Mbar, _default_rank_tol(Mbar, tol))
            if a is not None:
                details["dependence"] = [float(x) for x in a]
        evidence.append(Evidence("rank(Mbar) = p <= m", ok, details))
        ok_all = ok_all and ok
    evidence.append(Evidence("coupled atoms", True, {"count": len(coupled), "total_atoms": len(atoms)}))
    return ok_all, evidence, atoms


def check_diagonal_case(canon, K, tol=None, *, atoms=None, atom_tol=None):
    """Index-set and atom rank conditions for real diagonalizable drift."""
    if canon.spectral.kind != "diagonal-real":
        raise RoutingError(f"spectral kind is {canon.spectral.kind!r}, expected 'diagonal-real'")
    K = K if isinstance(K, Interval) else Interval(*K)
    _check_one_signed(K)
    ok, ev, _ = _diagonal_test(canon.eigenvalues.real, canon.Btilde, canon.m, K, tol, atoms, atom_tol)
    return Verdict(CONTROLLABLE if ok else UNCONTROLLABLE, ROUTE_DIAGONAL, ev)


# ---------------------------------------------------------------- Jordan case

def check_jordan_block(B, blocksize=None, tol=None):
    """Single Jordan block: controllable iff ``rank(B) = n``."""
    B = as_matrix(B, "B")
    n = B.shape[0] if blocksize is None else int(blocksize)
    if B.shape[0] != n:
        raise InputError(f"B has {B.shape[0]} rows for a block of size {n}")
    r = numeric_rank(B, tol)
    return Verdict(CONTROLLABLE if r == n else UNCONTROLLABLE, ROUTE_JORDAN,
                   [Evidence("rank(B_block) = block size", r == n, {"rank": r, "size": n})])


def check_jordan_case(canon, K, tol=None, *, atom_tol=None):
    """Row-block ranks per Jordan block plus the diagonal test on the flattened spectrum."""
    if canon.spectral.kind not in ("jordan", "diagonal-real"):
        raise RoutingError(f"spectral kind is {canon.spectral.kind!r}, expected 'jordan'")
    K = K if isinstance(K, Interval) else Interval(*K)
    _check_one_signed(K)
    evidence, ok_blocks = [], True
    for (lam, size), sl in zip(canon.spectral.blocks, canon.spectral.block_slices()):
        block = canon.PinvB[sl]
        r = numeric_rank(block, tol)
        ok = r == size
        ok_blocks = ok_blocks and ok
        evidence.append(Evidence("rank(B_ij) = d_ij", ok, {
            "eigenvalue": float(np.real(lam)), "size": size,
            "rows": [sl.start + 1, sl.stop], "rank": r,
        }))
    ok_diag, ev_diag, _ = _diagonal_test(canon.eigenvalues.real, canon.Btilde, canon.m, K, tol,
                                         atom_tol=atom_tol)
    evidence.extend(ev_diag)
    ok = ok_blocks and ok_diag
    return Verdict(CONTROLLABLE if ok else UNCONTROLLABLE, ROUTE_JORDAN, evidence)


# ---------------------------------------------------------------- orchestration

def classify(system, tol=None, fallback=False, *, atom_tol=None, tol_cluster=None,
             fallback_order=30, fallback_count=33):
    """Route a system through the applicable test and return its :class:`Verdict`."""
    if not isinstance(system, EnsembleSystem):
        raise InputError("classify expects an EnsembleSystem")
    if system.B1 is not None:
        raise RoutingError("parameter-dependent input matrix; algebraic tests need B1 = 0, "
                           "use numeric reachability instead")
    K = system.K
    _check_one_signed(K)
    if K.crosses_origin:
        return check_origin_case(system, tol)
    n = system.n
    rA = numeric_rank(system.A0, tol)
    if rA < n:
        return Verdict(UNCONTROLLABLE, ROUTE_SINGULAR,
                       [Evidence("rank(A0) = n", False, {"rank": rA, "n": n})],
                       ["a zero eigenvalue leaves a mode whose response does not depend on beta"])
    rB = numeric_rank(system.B0, tol)
    if rB == n:
        return Verdict(CONTROLLABLE, ROUTE_SUFFICIENT, [
            Evidence("rank(A0) = n", True, {"rank": rA, "n": n}),
            Evidence("rank(B0) = n", True, {"rank": rB, "n": n}),
        ])
    Bred, kept = reduce_columns(system.B0, tol)
    reduced = EnsembleSystem(system.A0, Bred, K, name=system.name)
    notes = []
    if len(kept) < system.m:
        notes.append(f"input columns reduced to {[k + 1 for k in kept]}")
    sf = spectral_decompose(system.A0, tol_cluster)
    if sf.kind == "diagonal-complex":
        notes.append("complex eigenvalues: no closed-form criterion, reporting inconclusive")
        evidence = [Evidence("real spectrum", False, {
            "eigenvalues_real": [float(np.real(v)) for v in sf.eigenvalues],
            "eigenvalues_imag": [float(np.imag(v)) for v in sf.eigenvalues],
        })]
        if fallback:
            from .reachability import canary_residual

            res = canary_residual(system, order=fallback_order, count=fallback_count)
            evidence.append(Evidence("numeric reachability of canary target", True, res))
        return Verdict(INCONCLUSIVE, ROUTE_COMPLEX, evidence, notes)
    canon = canonicalize(reduced, tol, spectral=sf)
    if isinstance(canon, Verdict):
        return Verdict(canon.status, canon.route, canon.evidence, notes)
    if sf.kind == "diagonal-real":
        v = check_diagonal_case(canon, K, tol, atom_tol=atom_tol)
    else:
        v = check_jordan_case(canon, K, tol, atom_tol=atom_tol)
    perm = Evidence("canonical permutation", True, {"permutation": list(canon.permutation)})
    return Verdict(v.status, v.route, (*v.evidence, perm), notes)


# ---------------------------------------------------------------- Muntz-Szasz

def muntz_check(progression="arithmetic", *, offset=0.0, step=1.0, ratio=None, first=1.0):
    """Density in ``C[0, 1]`` of monomials with the given exponent growth.

    ``arithmetic``: exponents ``offset + step*k``; the reciprocal sum diverges,
    so the span is dense. ``geometric``: exponents ``first * ratio**k`` with
    ``ratio > 1`` have a convergent reciprocal sum, so the span is not dense.
    """
    if progression == "arithmetic":
        if offset < 0 or step <= 0:
            raise InputError("arithmetic exponents need offset >= 0 and step > 0")
        return "dense"
    if progression == "geometric":
        if ratio is None or ratio <= 1 or first <= 0:
            raise InputError("geometric exponents need first > 0 and ratio > 1")
        return "not-dense"
    raise UnsupportedError(f"unsupported exponent growth rule {progression!r}")
