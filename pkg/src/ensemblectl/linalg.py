"""Dense linear-algebra primitives with explicit tolerances.

Everything here is a pure function of its inputs. Matrices are plain
``numpy.ndarray`` objects; validation helpers turn lists into float arrays and
reject non-finite entries up front.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import IllConditionedError, InputError

DEFAULT_RANK_SCALE = 1e-10
DEFAULT_CLUSTER_SCALE = 1e-8
DEFAULT_COND_MAX = 1e10
DEFAULT_RECON_TOL = 1e-6
# clusters closer than this multiple of the clustering tolerance are ambiguous
CLUSTER_SEPARATION = 1e3


def as_matrix(M, name="matrix", *, square=False, allow_complex=False):
    """Return ``M`` as a finite 2-D array, raising :class:`InputError` otherwise."""
    dtype = complex if allow_complex and np.iscomplexobj(M) else float
    try:
        arr = np.array(M, dtype=dtype)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{name}: cannot convert to a numeric matrix ({exc})") from None
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise InputError(f"{name}: expected a 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name}: entries must be finite")
    if square and arr.shape[0] != arr.shape[1]:
        raise InputError(f"{name}: expected a square matrix, got shape {arr.shape}")
    return arr


def numeric_rank(M, tol_rel=None):
    """Count singular values above ``tol_rel * sigma_max``.

    The default threshold is ``1e-10 * max(rows, cols)``.

    >>> numeric_rank([[1.0, 2.0], [2.0, 4.0]])
    1
    """
    M = as_matrix(M, "rank input", allow_complex=True)
    if M.size == 0:
        return 0
    if tol_rel is None:
        tol_rel = DEFAULT_RANK_SCALE * max(M.shape)
    if not 0.0 < tol_rel < 1.0:
        raise InputError(f"tol_rel must lie in (0, 1), got {tol_rel}")
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > tol_rel * s[0]))


# Pade coefficients and norm thresholds for scaling-and-squaring (Higham 2005).
_PADE = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
         960960.0, 16380.0, 182.0, 1.0),
}
_THETA = {3: 1.495585217958292e-2, 5: 2.539398330063230e-1,
          7: 9.504178996162932e-1, 9: 2.097847961257068e0, 13: 5.371920351148152e0}


def _pade_uv(A, degree):
    b = _PADE[degree]
    n = A.shape[0]
    ident = np.eye(n, dtype=A.dtype)
    A2 = A @ A
    if degree == 13:
        A4 = A2 @ A2
        A6 = A4 @ A2
        U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
                 + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
        V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
             + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident)
        return U, V
    powers = [ident, A2]
    while len(powers) < (degree + 1) // 2:
        powers.append(powers[-1] @ A2)
    U = A @ sum(b[2 * k + 1] * P for k, P in enumerate(powers))
    V = sum(b[2 * k] * P for k, P in enumerate(powers))
    return U, V


def matrix_exponential(M):
    """Matrix exponential by scaling-and-squaring with diagonal Pade approximants."""
    M = as_matrix(M, "exponent", square=True, allow_complex=True)
    n = M.shape[0]
    if n == 0:
        return M.copy()
    norm1 = np.linalg.norm(M, 1)
    for degree in (3, 5, 7, 9):
        if norm1 <= _THETA[degree]:
            U, V = _pade_uv(M, degree)
            return np.linalg.solve(V - U, V + U)
    s = max(0, int(math.ceil(math.log2(norm1 / _THETA[13]))))
    U, V = _pade_uv(M / 2.0 ** s, 13)
    E = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        E = E @ E
    return E


def zoh_discretize(A, B, dt):
    """Exact zero-order-hold pair ``(e^{A dt}, int_0^dt e^{As} ds B)``.

    Uses the augmented block exponential, so singular ``A`` needs no special case.
    """
    A = as_matrix(A, "A", square=True)
    B = as_matrix(B, "B")
    if B.shape[0] != A.shape[0]:
        raise InputError(f"B has {B.shape[0]} rows but A is {A.shape[0]}x{A.shape[0]}")
    if not (dt > 0 and math.isfinite(dt)):
        raise InputError(f"dt must be positive and finite, got {dt}")
    n, m = B.shape
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = A
    aug[:n, n:] = B
    E = matrix_exponential(aug * dt)
    return E[:n, :n].copy(), E[:n, n:].copy()


@dataclass(frozen=True)
class SpectralForm:
    """Similarity ``A = P J P^{-1}`` with ``J`` in (block) Jordan form.

    ``eigenvalues`` is the diagonal of ``J`` in column order of ``P``;
    ``blocks`` lists ``(eigenvalue, size)`` in the same order.
    """

    kind: str
    eigenvalues: np.ndarray
    blocks: tuple
    P: np.ndarray
    J: np.ndarray
    conditioning: float
    Pinv: np.ndarray = field(repr=False)

    @property
    def n(self):
        return self.P.shape[0]

    @property
    def is_real(self):
        return self.kind != "diagonal-complex"

    def block_slices(self):
        out, start = [], 0
        for _, size in self.blocks:
            out.append(slice(start, start + size))
            start += size
        return out


def _jordan_matrix(blocks, dtype):
    n = sum(size for _, size in blocks)
    J = np.zeros((n, n), dtype=dtype)
    start = 0
    for lam, size in blocks:
        for i in range(size):
            J[start + i, start + i] = lam
            if i + 1 < size:
                J[start + i, start + i + 1] = 1.0
        start += size
    return J


def _exact_jordan_blocks(A):
    """Blocks of ``A`` if it is already an exact real Jordan matrix, else None."""
    n = A.shape[0]
    if np.any(np.triu(A, 2)) or np.any(np.tril(A, -1)):
        return None
    sup = np.diag(A, 1)
    if not np.all((sup == 0.0) | (sup == 1.0)):
        return None
    d = np.diag(A)
    if np.any(d[:-1][sup == 1.0] != d[1:][sup == 1.0]):
        return None
    blocks, size = [], 1
    for i in range(n - 1):
        if sup[i] == 1.0:
            size += 1
        else:
            blocks.append((float(d[i]), size))
            size = 1
    blocks.append((float(d[n - 1]), size))
    return blocks


def _cluster(values, tol):
    """Single-linkage clustering of complex values; returns lists of indices."""
    order = sorted(range(len(values)), key=lambda i: (values[i].real, values[i].imag))
    clusters = []
    for i in order:
        for cl in clusters:
            if any(abs(values[i] - values[j]) <= tol for j in cl):
                cl.append(i)
                break
        else:
            clusters.append([i])
    # a second pass merges chains that single insertion order may have split
    merged = True
    while merged:
        merged = False
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                if min(abs(values[i] - values[j]) for i in clusters[a] for j in clusters[b]) <= tol:
                    clusters[a].extend(clusters.pop(b))
                    merged = True
                    break
            if merged:
                break
    return clusters


def _null_basis(M, dim):
    """Orthonormal basis (columns) of the ``dim`` weakest right singular directions."""
    _, _, Vh = np.linalg.svd(M)
    return Vh[M.shape[1] - dim:].conj().T


def _rank_abs(M, thr):
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.count_nonzero(s > thr))


def _extends_span(S, v, thr):
    if S.shape[1] == 0:
        return np.linalg.norm(v) > thr
    Q, _ = np.linalg.qr(S)
    r = v - Q @ (Q.conj().T @ v)
    r = r - Q @ (Q.conj().T @ r)
    return np.linalg.norm(r) > thr * max(1.0, np.linalg.norm(v))


def _jordan_chains(Nr, sizes, thr_of):
    """Jordan basis of a nilpotent matrix with the given block sizes (descending)."""
    a = Nr.shape[0]
    kernels = {0: np.zeros((a, 0), dtype=Nr.dtype)}
    power = np.eye(a, dtype=Nr.dtype)
    for k in range(1, max(sizes) + 1):
        power = power @ Nr
        rank_k = _rank_abs(power, thr_of(k))
        kernels[k] = _null_basis(power, a - rank_k)
    chains = []
    for s in sorted(set(sizes), reverse=True):
        need = sizes.count(s)
        span = [kernels[s - 1]]
        for v, t in chains:
            span.append((np.linalg.matrix_power(Nr, t - s) @ v).reshape(-1, 1))
        S = np.hstack(span)
        for col in kernels[s].T:
            if need == 0:
                break
            if _extends_span(S, col, 1e-8):
                v = col / np.linalg.norm(col)
                chains.append((v, s))
                S = np.hstack([S, v.reshape(-1, 1)])
                need -= 1
        if need:
            raise IllConditionedError("could not assemble Jordan chains for an eigenvalue cluster")
    columns, out_sizes = [], []
    for v, s in chains:
        for p in range(s - 1, -1, -1):
            columns.append(np.linalg.matrix_power(Nr, p) @ v)
        out_sizes.append(s)
    return np.column_stack(columns), out_sizes


def spectral_decompose(A, tol_cluster=None, *, cond_max=DEFAULT_COND_MAX, tol_spec=DEFAULT_RECON_TOL):
    """Eigenvalue clustering and Jordan structure of a real square matrix.

    Eigenvalues closer than ``tol_cluster`` (default ``1e-8 * ||A||``) are merged.
    Distinct clusters closer than ``1e3 * tol_cluster`` are refused as ambiguous.
    Block sizes come from the ranks of powers of ``A - lambda I`` restricted to
    the generalized eigenspace. Exact Jordan (or diagonal) inputs are recognised
    and returned with ``P = I``.
    """
    A = as_matrix(A, "A", square=True)
    n = A.shape[0]
    exact = _exact_jordan_blocks(A)
    if exact is not None:
        kind = "jordan" if any(size > 1 for _, size in exact) else "diagonal-real"
        ident = np.eye(n)
        return SpectralForm(kind, np.diag(A).copy(), tuple(exact), ident, A.copy(), 1.0, ident)

    normA = np.linalg.norm(A, 2)
    tol = DEFAULT_CLUSTER_SCALE * normA if tol_cluster is None else float(tol_cluster)
    if tol <= 0:
        raise InputError("tol_cluster must be positive")
    w = np.linalg.eigvals(A)
    clusters = _cluster(list(w), tol)
    centers = [np.mean(w[cl]) for cl in clusters]
    for i in range(len(centers)):
        for j in range(i + 1, len(centers)):
            gap = abs(centers[i] - centers[j])
            if gap < CLUSTER_SEPARATION * tol:
                raise IllConditionedError(
                    f"eigenvalue clusters {centers[i]:.6g} and {centers[j]:.6g} are only "
                    f"{gap:.3g} apart; Jordan structure is ambiguous at tolerance {tol:.3g}",
                    estimate=gap,
                )

    def thr_of(k):
        return CLUSTER_SEPARATION * tol * max(normA, 1.0) ** (k - 1)

    columns, blocks = [], []
    for cl, lam in zip(clusters, centers):
        if abs(lam.imag) <= tol:
            lam = float(lam.real)
        a = len(cl)
        N = A - lam * np.eye(n)
        if a == 1:
            columns.append(_null_basis(N, 1))
            blocks.append((lam, 1))
            continue
        V = _null_basis(np.linalg.matrix_power(N, a), a)
        Nr = V.conj().T @ N @ V
        ranks = [a] + [_rank_abs(np.linalg.matrix_power(Nr, k), thr_of(k)) for k in range(1, a + 1)]
        at_least = [ranks[k - 1] - ranks[k] for k in range(1, a + 1)]
        sizes = []
        for k in range(a, 0, -1):
            exactly = at_least[k - 1] - (at_least[k] if k < a else 0)
            sizes.extend([k] * exactly)
        if sum(sizes) != a or ranks[-1] != 0:
            raise IllConditionedError(f"inconsistent Jordan structure for eigenvalue {lam:.6g}")
        if max(sizes) == 1:
            columns.append(V)
            blocks.extend([(lam, 1)] * a)
            continue
        chain_cols, chain_sizes = _jordan_chains(Nr, sizes, thr_of)
        columns.append(V @ chain_cols)
        blocks.extend((lam, s) for s in chain_sizes)

    P = np.hstack(columns)
    complex_spec = any(isinstance(lam, complex) for lam, _ in blocks)
    if not complex_spec:
        P = P.real
    # unit columns for semisimple clusters; Jordan chains keep their coupling scale
    start = 0
    for lam, size in blocks:
        if size == 1:
            P[:, start] /= np.linalg.norm(P[:, start])
        start += size
    cond = float(np.linalg.cond(P))
    if not np.isfinite(cond) or cond > cond_max:
        raise IllConditionedError(f"ill-conditioned spectral form (cond(P) = {cond:.3g})", estimate=cond)
    J = _jordan_matrix(blocks, complex if complex_spec else float)
    Pinv = np.linalg.inv(P)
    err = np.linalg.norm(A - P @ J @ Pinv, 2)
    if err > tol_spec * max(normA, np.finfo(float).tiny):
        raise IllConditionedError(f"spectral reconstruction error {err:.3g} exceeds tolerance", estimate=cond)
    if complex_spec:
        kind = "diagonal-complex"
    elif any(size > 1 for _, size in blocks):
        kind = "jordan"
    else:
        kind = "diagonal-real"
    eig = np.diag(J).copy()
    return SpectralForm(kind, eig, tuple(blocks), P, J, cond, Pinv)
