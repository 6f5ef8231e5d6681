"""Decoherence-free subspaces of non-Hermitian measurement Hamiltonians.

Only the real part of the spectrum of ``H_meas`` supports undamped
dynamics; eigenvectors whose eigenvalues have a negative imaginary part
leak away.  For the leaky-cavity model the kernel (eta = 0) of ``H_meas``
is the decoherence-free subspace, computed sector by sector in the
excitation number, which ``H_meas`` conserves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError, ShapeError
from .linalg import (
    HERMITICITY_TOL,
    as_cmatrix,
    as_square,
    canonical_basis,
    gen_eig,
    hermiticity_defect,
    orthonormal_columns_error,
    spectral_norm,
)
from .models import HamiltonianPair, SectorDecomposition


@dataclass(frozen=True, eq=False)
class DfsReport:
    dimension: int
    basis: np.ndarray
    per_sector: list
    labels: list
    flagged: list = field(default_factory=list)


def real_spectrum_subspace(H_meas, imag_tol: float = 1e-8, cluster_tol: float = 1e-8):
    """Real eigenvalues of ``H_meas`` and orthonormal bases of their eigenspaces.

    An eigenvalue counts as real when ``|Im| <= imag_tol * ||H_meas||``.  Real
    eigenvalues closer than ``cluster_tol * max(1, ||H_meas||)`` form one
    cluster whose eigenvectors are orthonormalized together.
    """
    if not imag_tol > 0:
        raise ValueError("imag_tol must be positive")
    A = as_square(H_meas, "H_meas")
    norm = spectral_norm(A)
    if norm == 0.0:
        return [0.0], [np.eye(A.shape[0], dtype=complex)]
    if hermiticity_defect(A) <= HERMITICITY_TOL:
        A = 0.5 * (A + A.conj().T)
    w, V = gen_eig(A)
    real = np.flatnonzero(np.abs(w.imag) <= imag_tol * norm)
    real = real[np.argsort(w[real].real, kind="stable")]
    etas, bases = [], []
    tol = cluster_tol * max(1.0, norm)
    groups = []
    for i in real:
        if groups and w[i].real - w[groups[-1][-1]].real <= tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    for g in groups:
        etas.append(float(np.mean(w[g].real)))
        bases.append(canonical_basis(V[:, g]))
    return etas, bases


def _label_vector(v, labels, tol=1e-10):
    """Ket-combination text such as ``+0.707107|021> -0.707107|012>``."""
    support = np.flatnonzero(np.abs(v) > tol)
    if support.size == 1 and abs(v[support[0]] - 1) <= tol:
        return labels[support[0]]
    terms = []
    for i in support:
        c = v[i]
        coef = f"{c.real:+.6g}" if abs(c.imag) <= tol else f"+({c.real:.6g}{c.imag:+.6g}j)"
        terms.append(f"{coef}{labels[i]}")
    return " ".join(terms)


def dfs_report(
    cavity_pair: HamiltonianPair, sectors: SectorDecomposition, imag_tol: float = 1e-8
) -> DfsReport:
    """Assemble the eta = 0 eigenspace of the cavity ``H_meas`` sector by sector.

    Nonzero real clusters, should any appear, are listed in ``flagged`` as
    ``(excitation_number, eta, dimension)`` and kept out of the basis.
    """
    if cavity_pair.name != "cavity":
        raise ModelError(f"dfs_report needs a cavity model, got {cavity_pair.name!r}")
    A = np.asarray(cavity_pair.H_meas)
    scale = max(1.0, spectral_norm(A))
    columns, per_sector, flagged = [], [], []
    for N, idx in sectors.sectors:
        idx = list(idx)
        block = A[np.ix_(idx, idx)]
        etas, bases = real_spectrum_subspace(block, imag_tol)
        kernel_dim = 0
        for eta, B in zip(etas, bases):
            if abs(eta) <= imag_tol * scale:
                for k in range(B.shape[1]):
                    v = np.zeros(cavity_pair.dim, dtype=complex)
                    v[idx] = B[:, k]
                    columns.append(v)
                kernel_dim += B.shape[1]
            else:
                flagged.append((N, eta, B.shape[1]))
        per_sector.append((N, kernel_dim))
    basis = np.column_stack(columns) if columns else np.zeros((cavity_pair.dim, 0), dtype=complex)
    labels = [_label_vector(basis[:, k], cavity_pair.basis_labels) for k in range(basis.shape[1])]
    return DfsReport(basis.shape[1], basis, per_sector, labels, flagged)


def project_effective_hamiltonian(H_weak, basis) -> np.ndarray:
    """``B^H H_weak B`` for an orthonormal basis ``B``."""
    H = as_square(H_weak, "H_weak")
    B = as_cmatrix(basis, "basis")
    if B.shape[0] != H.shape[0]:
        raise ShapeError("basis rows differ from the Hamiltonian dimension")
    if orthonormal_columns_error(B) > 1e-10:
        raise ValueError("basis columns are not orthonormal")
    return B.conj().T @ H @ B


def dfs_zeno_generator(H_weak, H_meas, K: float, basis) -> np.ndarray:
    """Strong-coupling generator ``P0 H_weak P0 + K H_meas``.

    The weak Hamiltonian survives only inside the decoherence-free subspace
    spanned by ``basis`` (``P0 = B B^H``).
    """
    B = as_cmatrix(basis, "basis")
    P0 = B @ B.conj().T
    H = as_square(H_weak, "H_weak")
    return P0 @ H @ P0 + K * as_square(H_meas, "H_meas")
