"""Dense complex linear algebra used by every other module.

The Hermitian eigensolver is a cyclic complex Jacobi iteration, the general
eigensolver is Hessenberg reduction followed by shifted QR with eigenvectors
from inverse iteration, and the matrix exponential switches between a
spectral path (Hermitian / skew-Hermitian input) and Padé-13 scaling and
squaring.  SVD-based helpers (norms, null spaces, condition numbers) lean on
``numpy.linalg``.

Output conventions, shared by all decompositions:

* eigenvalues sorted by ascending real part, then ascending imaginary part
  (stable sort);
* each eigenvector column has unit norm and its first component of modulus
  above 1e-8 is real and positive;
* eigenvectors belonging to one degenerate cluster are Gram-Schmidt
  orthonormalized in discovery order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConvergenceError,
    HermiticityError,
    NearDefectiveError,
    ShapeError,
)

HERMITICITY_TOL = 1e-10
PHASE_THRESHOLD = 1e-8
JACOBI_MAX_DIM = 64
NEAR_DEFECTIVE_COND = 1e8

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues and right eigenvectors (as columns)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __iter__(self):
        yield self.eigenvalues
        yield self.eigenvectors


# ---------------------------------------------------------------------------
# small helpers


def as_cmatrix(A, name: str = "matrix") -> np.ndarray:
    """Return ``A`` as a finite 2-D complex array (copying only if needed)."""
    M = np.asarray(A, dtype=complex)
    if M.ndim != 2:
        raise ShapeError(f"{name} must be two-dimensional, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return M


def as_square(A, name: str = "matrix") -> np.ndarray:
    M = as_cmatrix(A, name)
    if M.shape[0] != M.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {M.shape}")
    return M


def spectral_norm(A) -> float:
    """Largest singular value (0 for an empty matrix)."""
    M = np.asarray(A, dtype=complex)
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


def hermiticity_defect(A) -> float:
    """Relative Frobenius-norm distance ``||A - A^H|| / ||A||``."""
    M = np.asarray(A, dtype=complex)
    scale = np.linalg.norm(M)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(M - M.conj().T) / scale)


def is_hermitian(A, tol: float = HERMITICITY_TOL) -> bool:
    return hermiticity_defect(A) <= tol


def fix_phases(V: np.ndarray) -> np.ndarray:
    """Rotate each column so its first non-negligible entry is real positive."""
    V = np.array(V, dtype=complex, copy=True)
    for k in range(V.shape[1]):
        col = V[:, k]
        big = np.flatnonzero(np.abs(col) > PHASE_THRESHOLD)
        if big.size:
            z = col[big[0]]
            V[:, k] = col * (np.conj(z) / abs(z))
            V[big[0], k] = abs(z)
    return V


def _gram_schmidt_inplace(V: np.ndarray, cols) -> None:
    """Modified Gram-Schmidt (two passes) on the listed columns of ``V``."""
    done = []
    for k in cols:
        v = V[:, k]
        for _ in range(2):
            for j in done:
                v = v - np.vdot(V[:, j], v) * V[:, j]
        nrm = np.linalg.norm(v)
        if nrm > 0:
            v = v / nrm
        V[:, k] = v
        done.append(k)


def _cluster_labels(values: np.ndarray, tol: float) -> np.ndarray:
    """Single-linkage clustering of complex values; label = min member index."""
    n = len(values)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(values[i] - values[j]) <= tol:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    return np.array([find(i) for i in range(n)])


def _sorted_order(values: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Ascending real part, then imaginary part; real parts within
    ``tol * max(1, max|values|)`` count as equal so conjugate pairs order
    by their imaginary parts."""
    order = np.argsort(values.real, kind="stable")
    if len(values) < 2:
        return order
    scale = tol * max(1.0, float(np.max(np.abs(values))))
    re = values.real[order]
    out, start = [], 0
    for i in range(1, len(order) + 1):
        if i == len(order) or re[i] - re[i - 1] > scale:
            block = order[start:i]
            out.extend(block[np.argsort(values.imag[block], kind="stable")])
            start = i
    return np.array(out, dtype=int)


# ---------------------------------------------------------------------------
# Hermitian eigenproblem


def _jacobi(A: np.ndarray):
    """Cyclic complex Jacobi; returns (real eigenvalues, unitary V)."""
    A = np.array(A, dtype=complex, copy=True)
    n = A.shape[0]
    V = np.eye(n, dtype=complex)
    fro = np.linalg.norm(A)
    if fro == 0.0 or n == 1:
        return A.diagonal().real.copy(), V
    iu = np.triu_indices(n, 1)
    converged = False
    for _ in range(60):
        off = np.sqrt(2.0) * np.linalg.norm(A[iu])
        if off <= 1e-15 * fro:
            converged = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                r = abs(apq)
                if r <= 1e-300 or r < 1e-18 * fro:
                    continue
                e = apq / r
                ec = np.conj(e)
                theta = (A[q, q].real - A[p, p].real) / (2.0 * r)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0:
                    t = -t
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # A <- G^H A G with G = [[c, s], [-s conj(e), c conj(e)]]
                ap = A[:, p].copy()
                aq = A[:, q].copy()
                A[:, p] = c * ap - s * ec * aq
                A[:, q] = s * ap + c * ec * aq
                rp = A[p, :].copy()
                rq = A[q, :].copy()
                A[p, :] = c * rp - s * e * rq
                A[q, :] = s * rp + c * e * rq
                A[p, q] = A[q, p] = 0.0
                A[p, p] = A[p, p].real
                A[q, q] = A[q, q].real
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * ec * vq
                V[:, q] = s * vp + c * ec * vq
    if not converged:
        off = np.sqrt(2.0) * np.linalg.norm(A[iu])
        if off > 1e-12 * fro:
            raise ConvergenceError(f"Jacobi iteration stalled (off-norm {off:.3g})")
    return A.diagonal().real.copy(), V


def herm_eig(A) -> EigenDecomposition:
    """Eigendecomposition of a Hermitian matrix.

    Parameters
    ----------
    A : array_like
        Square matrix with ``||A - A^H|| <= 1e-10 ||A||`` (Frobenius).

    Returns
    -------
    EigenDecomposition
        Real ascending eigenvalues and a unitary eigenvector matrix.
    """
    M = as_square(A)
    if hermiticity_defect(M) > HERMITICITY_TOL:
        raise HermiticityError(
            f"herm_eig: input is not Hermitian (relative defect {hermiticity_defect(M):.3g})"
        )
    M = 0.5 * (M + M.conj().T)
    n = M.shape[0]
    if n <= JACOBI_MAX_DIM:
        w, V = _jacobi(M)
    else:
        w, V = np.linalg.eigh(M)
        V = V.astype(complex)
    order = np.argsort(w, kind="stable")
    w = w[order]
    V = V[:, order]
    scale = max(1.0, float(np.max(np.abs(w)))) if n else 1.0
    labels = _cluster_labels_sorted_real(w, 1e-12 * scale)
    for lab in np.unique(labels):
        cols = np.flatnonzero(labels == lab)
        if cols.size > 1:
            _gram_schmidt_inplace(V, cols)
    V = fix_phases(V)
    return EigenDecomposition(w, V)


def _cluster_labels_sorted_real(w: np.ndarray, tol: float) -> np.ndarray:
    labels = np.zeros(len(w), dtype=int)
    for i in range(1, len(w)):
        labels[i] = labels[i - 1] if w[i] - w[i - 1] <= tol else labels[i - 1] + 1
    return labels


# ---------------------------------------------------------------------------
# general eigenproblem


def _hessenberg(A: np.ndarray) -> np.ndarray:
    """Unitary similarity to upper Hessenberg form via Householder reflectors."""
    H = np.array(A, dtype=complex, copy=True)
    n = H.shape[0]
    for k in range(n - 2):
        x = H[k + 1 :, k].copy()
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x
        v[0] += phase * alpha
        v /= np.linalg.norm(v)
        H[k + 1 :, :] -= 2.0 * np.outer(v, v.conj() @ H[k + 1 :, :])
        H[:, k + 1 :] -= 2.0 * np.outer(H[:, k + 1 :] @ v, v.conj())
        H[k + 2 :, k] = 0.0
    return H


def _wilkinson_shift(a, b, c, d):
    half = 0.5 * (a - d)
    disc = np.sqrt(half * half + b * c)
    mu1 = 0.5 * (a + d) + disc
    mu2 = 0.5 * (a + d) - disc
    return mu1 if abs(mu1 - d) <= abs(mu2 - d) else mu2


def _qr_eigenvalues(H: np.ndarray, scale: float) -> np.ndarray:
    """Eigenvalues of an upper Hessenberg matrix by shifted QR with deflation."""
    H = np.array(H, dtype=complex, copy=True)
    n = H.shape[0]
    eigs = np.zeros(n, dtype=complex)
    hi = n - 1
    its = 0
    total = 0
    while hi >= 0:
        if hi == 0:
            eigs[0] = H[0, 0]
            break
        lo = hi
        while lo > 0:
            s = abs(H[lo, lo]) + abs(H[lo - 1, lo - 1])
            if s == 0.0:
                s = scale
            if abs(H[lo, lo - 1]) <= _EPS * s:
                H[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            eigs[hi] = H[hi, hi]
            hi -= 1
            its = 0
            continue
        its += 1
        total += 1
        if total > 100 * n:
            raise ConvergenceError("shifted QR iteration did not converge")
        if its % 11 == 10:
            mu = H[hi, hi] + 1.5 * abs(H[hi, hi - 1]) * (1 + 0.5j)
        else:
            mu = _wilkinson_shift(H[hi - 1, hi - 1], H[hi - 1, hi], H[hi, hi - 1], H[hi, hi])
        W = H[lo : hi + 1, lo : hi + 1]
        m = W.shape[0]
        W[np.diag_indices(m)] -= mu
        rotations = []
        for k in range(m - 1):
            x, y = W[k, k], W[k + 1, k]
            r = np.hypot(abs(x), abs(y))
            if r == 0.0:
                rotations.append(None)
                continue
            G = np.array([[np.conj(x), np.conj(y)], [-y, x]]) / r
            W[k : k + 2, k:] = G @ W[k : k + 2, k:]
            W[k + 1, k] = 0.0
            rotations.append(G)
        for k, G in enumerate(rotations):
            if G is None:
                continue
            W[: k + 2, k : k + 2] = W[: k + 2, k : k + 2] @ G.conj().T
        W[np.diag_indices(m)] += mu
    return eigs


def _inverse_iteration(A: np.ndarray, values: np.ndarray, labels: np.ndarray, scale: float):
    n = A.shape[0]
    rng = np.random.default_rng(20240611)
    V = np.zeros((n, n), dtype=complex)
    delta = 1e-10 * scale * (1.0 + 0.5j)
    eye = np.eye(n)
    for lab in np.unique(labels):
        members = np.flatnonzero(labels == lab)
        shift = values[members[0]] + delta
        M = A - shift * eye
        found = []
        for k in members:
            x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            for _ in range(3):
                if found:
                    Q = np.linalg.qr(np.column_stack(found))[0]
                    x = x - Q @ (Q.conj().T @ x)
                try:
                    x = np.linalg.solve(M, x)
                except np.linalg.LinAlgError:
                    M = M - delta * eye
                    x = np.linalg.solve(M, x)
                x = x / np.linalg.norm(x)
            found.append(x)
            V[:, k] = x
    return V


def gen_eig(A) -> EigenDecomposition:
    """Eigendecomposition of a general (diagonalizable) complex matrix.

    Raises
    ------
    NearDefectiveError
        If the eigenvector basis has condition number above 1e8.
    """
    M = as_square(A)
    n = M.shape[0]
    if n == 0:
        return EigenDecomposition(np.zeros(0, complex), np.zeros((0, 0), complex))
    norm = spectral_norm(M)
    scale = max(1.0, norm)
    raw = _qr_eigenvalues(_hessenberg(M), scale)
    labels = _cluster_labels(raw, 1e-9 * scale)
    values = raw.copy()
    for lab in np.unique(labels):
        members = labels == lab
        values[members] = raw[members].mean()
    order = _sorted_order(values)
    values = values[order]
    labels = labels[order]
    V = _inverse_iteration(M, values, labels, scale)
    cond = np.linalg.cond(V)
    if not np.isfinite(cond) or cond > NEAR_DEFECTIVE_COND:
        raise NearDefectiveError(
            f"gen_eig: eigenvector basis condition number {cond:.3g} exceeds "
            f"{NEAR_DEFECTIVE_COND:.0e} (near-defective matrix)"
        )
    for lab in np.unique(labels):
        cols = np.flatnonzero(labels == lab)
        if cols.size > 1:
            _gram_schmidt_inplace(V, cols)
    V = fix_phases(V)
    resid = np.linalg.norm(M @ V - V * values, axis=0)
    if np.any(resid > 1e-8 * max(norm, _EPS)):
        raise ConvergenceError(
            f"gen_eig: eigenvector residual {resid.max():.3g} exceeds 1e-8*||A||"
        )
    return EigenDecomposition(values, V)


# ---------------------------------------------------------------------------
# matrix exponential

_PADE13 = (
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
)
_THETA13 = 5.371920351148152


def _expm_pade13(A: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    norm1 = np.linalg.norm(A, 1)
    s = 0
    if norm1 > _THETA13:
        s = int(np.ceil(np.log2(norm1 / _THETA13)))
    A = A / (2.0**s)
    b = _PADE13
    ident = np.eye(n, dtype=complex)
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A4 @ A2
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    V = A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident
    R = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        R = R @ R
    return R


def expm(A) -> np.ndarray:
    """Matrix exponential.

    Hermitian and skew-Hermitian inputs go through ``herm_eig`` so the result
    is exactly structured (unitary for skew-Hermitian ``A``); everything else
    uses Padé-13 scaling and squaring.
    """
    M = as_square(A)
    n = M.shape[0]
    fro = np.linalg.norm(M)
    if fro == 0.0:
        return np.eye(n, dtype=complex)
    if np.linalg.norm(M - M.conj().T) <= 1e-14 * fro:
        w, V = herm_eig(M)
        return (V * np.exp(w)) @ V.conj().T
    if np.linalg.norm(M + M.conj().T) <= 1e-14 * fro:
        w, V = herm_eig(1j * M)
        return (V * np.exp(-1j * w)) @ V.conj().T
    return _expm_pade13(M)


# ---------------------------------------------------------------------------
# subspaces


def canonical_basis(B, tol: float = 1e-12) -> np.ndarray:
    """Deterministic orthonormal basis for the column span of ``B``.

    Standard basis vectors are projected onto the span and orthogonalized in
    index order; at each step the lowest index whose residual is at least half
    the largest remaining residual is taken, which keeps the construction
    well conditioned.  Columns follow the phase convention.
    """
    B = as_cmatrix(B, "basis")
    n, k = B.shape
    if k == 0:
        return np.zeros((n, 0), dtype=complex)
    Q = np.linalg.qr(B)[0]
    P = Q @ Q.conj().T
    basis = []
    R = P.copy()
    for _ in range(k):
        norms = np.linalg.norm(R, axis=0)
        best = norms.max()
        if best <= tol:
            break
        i = int(np.flatnonzero(norms >= 0.5 * best)[0])
        u = R[:, i] / norms[i]
        for _ in range(2):
            for v in basis:
                u = u - np.vdot(v, u) * v
            u = u / np.linalg.norm(u)
        basis.append(u)
        R = R - np.outer(u, u.conj() @ R)
    return fix_phases(np.column_stack(basis)) if basis else np.zeros((n, 0), dtype=complex)


def null_space(A, tol: float) -> np.ndarray:
    """Orthonormal basis of ``{v : ||A v|| <= tol ||A|| ||v||}``.

    Returns an ``n x 0`` array when the kernel is trivial.
    """
    if not tol > 0:
        raise ValueError("null_space: tol must be positive")
    M = as_cmatrix(A)
    n = M.shape[1]
    if M.size == 0:
        return np.eye(n, dtype=complex)
    _, s, vh = np.linalg.svd(M, full_matrices=True)
    norm = s[0] if s.size else 0.0
    rank = int(np.sum(s > tol * norm))
    kernel = vh[rank:].conj().T
    return canonical_basis(kernel) if kernel.shape[1] else np.zeros((n, 0), dtype=complex)


def orthonormal_columns_error(B) -> float:
    """``max |B^H B - 1|`` entrywise."""
    B = np.asarray(B, dtype=complex)
    return float(np.max(np.abs(B.conj().T @ B - np.eye(B.shape[1])), initial=0.0))
