"""Zeno subspaces, Zeno Hamiltonians and strong-coupling evolutions.

For ``H_K = H + K * H_meas`` with Hermitian ``H_meas = sum_n eta_n P_n`` the
large-K dynamics is generated by the Zeno Hamiltonian

    H^Z = sum_n P_n H P_n + K sum_n eta_n P_n,

and the exact propagator intertwines the eigenprojections up to O(1/K).
This module builds the partition, the Zeno generator, exact and limiting
propagators, the finite-K defects that measure convergence, and the
perturbative expansion of the spectrum of ``H_meas + lam * H``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    HermiticityError,
    HigherOrderDegeneracyError,
    InvalidStateError,
    NearDefectiveError,
    SectorTrackingError,
    ShapeError,
)
from .linalg import (
    HERMITICITY_TOL,
    as_square,
    expm,
    gen_eig,
    herm_eig,
    hermiticity_defect,
    spectral_norm,
)
from .models import HamiltonianPair


@dataclass(frozen=True, eq=False)
class ZenoPartition:
    """Distinct eigenvalues of ``H_meas`` with their orthogonal projectors."""

    etas: np.ndarray
    projectors: tuple
    multiplicities: tuple
    bases: tuple

    def __len__(self):
        return len(self.etas)

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0]

    def sector_of(self, eta: float) -> int:
        """Index of the sector whose eigenvalue is closest to ``eta``."""
        return int(np.argmin(np.abs(self.etas - eta)))


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    survival: np.ndarray
    subspace_probs: np.ndarray | None = None
    states: np.ndarray | None = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1:
            raise ShapeError("times must be one-dimensional")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        if len(self.survival) != t.size:
            raise ShapeError("survival length differs from times")
        for extra in (self.subspace_probs, self.states):
            if extra is not None and len(extra) != t.size:
                raise ShapeError("per-time data length differs from times")


def _require_hermitian(A, what):
    if hermiticity_defect(A) > HERMITICITY_TOL:
        raise HermiticityError(f"{what} must be Hermitian (relative defect {hermiticity_defect(A):.3g})")


def spectral_partition(H_meas, cluster_tol: float = 1e-9) -> ZenoPartition:
    """Group the spectrum of a Hermitian ``H_meas`` into distinct eigenvalues.

    Eigenvalues closer than ``cluster_tol * max(1, ||H_meas||)`` (spectral
    norm) are merged; the merged eigenvalue is the cluster mean.
    """
    if not cluster_tol > 0:
        raise ValueError("cluster_tol must be positive")
    A = as_square(H_meas, "H_meas")
    _require_hermitian(A, "H_meas")
    w, V = herm_eig(A)
    tol = cluster_tol * max(1.0, spectral_norm(A))
    groups = [[0]]
    for i in range(1, len(w)):
        if w[i] - w[i - 1] <= tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    etas, projectors, mults, bases = [], [], [], []
    for g in groups:
        B = V[:, g]
        B.setflags(write=False)
        P = B @ B.conj().T
        P.setflags(write=False)
        etas.append(float(np.mean(w[g])))
        projectors.append(P)
        mults.append(len(g))
        bases.append(B)
    return ZenoPartition(np.array(etas), tuple(projectors), tuple(mults), tuple(bases))


def _check_partition(pair: HamiltonianPair, partition: ZenoPartition):
    if partition.dim != pair.dim:
        raise ShapeError(f"partition dimension {partition.dim} differs from model dimension {pair.dim}")


def diagonal_part(H, partition: ZenoPartition) -> np.ndarray:
    """``sum_n P_n H P_n``."""
    H = as_square(H, "H")
    if H.shape[0] != partition.dim:
        raise ShapeError("H and partition dimensions differ")
    return sum(P @ H @ P for P in partition.projectors)


def zeno_hamiltonian(pair: HamiltonianPair, partition: ZenoPartition) -> np.ndarray:
    """``sum_n P_n H P_n + K sum_n eta_n P_n``."""
    _check_partition(pair, partition)
    HZ = diagonal_part(pair.H, partition)
    for eta, P in zip(partition.etas, partition.projectors):
        HZ = HZ + pair.K * eta * P
    return HZ


def _normalized_state(psi0, dim):
    psi = np.asarray(psi0, dtype=complex).reshape(-1)
    if psi.size != dim:
        raise ShapeError(f"initial state has length {psi.size}, expected {dim}")
    if abs(np.linalg.norm(psi) - 1.0) > 1e-12:
        raise InvalidStateError(f"initial state norm {np.linalg.norm(psi):.15g} is not 1")
    return psi


def evolve(total, psi0, times, partition: ZenoPartition | None = None, keep_states: bool = False) -> Trajectory:
    """Survival probability ``|<psi0| exp(-i total t) |psi0>|^2`` on a grid.

    The evolved state is never renormalized, so non-Hermitian generators
    report the absolute (decaying) probability.  With ``partition`` the
    sector probabilities ``||P_n psi(t)||^2`` are also returned.
    """
    A = as_square(total, "total Hamiltonian")
    psi = _normalized_state(psi0, A.shape[0])
    t = np.asarray(times, dtype=float).reshape(-1)
    if t.size > 1 and np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly increasing")
    if partition is not None and partition.dim != A.shape[0]:
        raise ShapeError("partition dimension differs from the Hamiltonian")
    need_states = keep_states or partition is not None

    states = None
    if hermiticity_defect(A) <= HERMITICITY_TOL:
        w, V = herm_eig(A)
        c = V.conj().T @ psi
        phases = np.exp(-1j * np.outer(t, w))
        amp = phases @ (np.abs(c) ** 2)
        if need_states:
            states = (phases * c) @ V.T
    else:
        try:
            w, V = gen_eig(A)
            c = np.linalg.solve(V, psi)
            left = psi.conj() @ V
            phases = np.exp(-1j * np.outer(t, w))
            amp = phases @ (left * c)
            if need_states:
                states = (phases * c) @ V.T
        except NearDefectiveError:
            states = np.array([expm(-1j * A * ti) @ psi for ti in t])
            amp = states @ psi.conj()
    survival = np.abs(amp) ** 2
    probs = None
    if partition is not None:
        probs = np.column_stack(
            [np.sum(np.abs(states @ B.conj()) ** 2, axis=1) for B in partition.bases]
        )
    return Trajectory(t, survival, probs, states if keep_states else None)


def propagator(total, t: float) -> np.ndarray:
    """``exp(-i total t)``."""
    return expm(-1j * as_square(total, "total Hamiltonian") * t)


def zeno_limit_evolution(pair: HamiltonianPair, partition: ZenoPartition, t: float) -> np.ndarray:
    """``exp(-i H^Z t)``."""
    return propagator(zeno_hamiltonian(pair, partition), t)


def _require_hermitian_pair(pair: HamiltonianPair):
    if not pair.hermitian_meas:
        raise HermiticityError(f"model {pair.name}: H_meas is not Hermitian")
    if not pair.hermitian_H:
        raise HermiticityError(f"model {pair.name}: H is not Hermitian")


def _check_K_values(K_values):
    K = np.asarray(K_values, dtype=float).reshape(-1)
    if K.size == 0 or np.any(K <= 0) or np.any(np.diff(K) <= 0):
        raise ValueError("K_values must be positive and strictly increasing")
    return K


def intertwining_defect(pair: HamiltonianPair, partition: ZenoPartition, K_values: Sequence[float], t: float) -> list:
    """``max_n ||[U_K(t), P_n]||`` for each K (spectral norm)."""
    _require_hermitian_pair(pair)
    _check_partition(pair, partition)
    out = []
    for K in _check_K_values(K_values):
        U = propagator(pair.total(K), t)
        out.append(max(spectral_norm(U @ P - P @ U) for P in partition.projectors))
    return out


def zeno_limit_distance(pair: HamiltonianPair, partition: ZenoPartition, K_values: Sequence[float], t: float) -> list:
    """``||exp(-i(H + K H_meas) t) - exp(-i H^Z(K) t)||`` for each K."""
    _require_hermitian_pair(pair)
    _check_partition(pair, partition)
    out = []
    for K in _check_K_values(K_values):
        pk = pair.with_K(K)
        out.append(spectral_norm(propagator(pk.total(), t) - zeno_limit_evolution(pk, partition, t)))
    return out


def zeno_limit_envelope(
    pair: HamiltonianPair, partition: ZenoPartition, K_values: Sequence[float], t: float, samples: int = 201
) -> list:
    """Largest propagator distance over ``s`` in ``[0, t]`` for each K.

    At a single time the distance carries oscillating factors
    ``|1 - exp(-i K (eta_n - eta_m) t)|``; the sup over the interval removes
    them and exposes the clean O(1/K) envelope.
    """
    _require_hermitian_pair(pair)
    _check_partition(pair, partition)
    s = np.linspace(0.0, t, samples)
    out = []
    for K in _check_K_values(K_values):
        pk = pair.with_K(K)
        w1, V1 = herm_eig(pk.total())
        w2, V2 = herm_eig(zeno_hamiltonian(pk, partition))
        best = 0.0
        for si in s:
            U1 = (V1 * np.exp(-1j * w1 * si)) @ V1.conj().T
            U2 = (V2 * np.exp(-1j * w2 * si)) @ V2.conj().T
            best = max(best, spectral_norm(U1 - U2))
        out.append(best)
    return out


@dataclass(frozen=True, eq=False)
class PerturbativeSpectrum:
    """Expansion of the eigenvalues of ``H_meas + lam * H``.

    ``eta_expansions[j]`` holds ``[eta_n, eta1, eta2]`` (``eta2`` only at
    order 2) for the j-th perturbed eigenvector; ``first_order_projections[j]``
    is the first-order correction to its projector.
    """

    lam: float
    order: int
    eta_expansions: list
    first_order_projections: list
    sector_index: list

    def __iter__(self):
        yield self.eta_expansions
        yield self.first_order_projections

    @property
    def predicted(self) -> np.ndarray:
        return np.array([sum(c * self.lam**k for k, c in enumerate(e)) for e in self.eta_expansions])


def perturbative_spectrum(
    pair: HamiltonianPair, lam: float, order: int = 2, partition: ZenoPartition | None = None
) -> PerturbativeSpectrum:
    """Degenerate perturbation theory for ``H_meas + lam * H`` up to ``order``.

    Inside each eigenspace of ``H_meas`` the first-order shifts are the
    eigenvalues of ``P_n H P_n``; second-order shifts are
    ``<u| H (Q_n / a_n) H |u>`` with the reduced resolvent
    ``Q_n / a_n = sum_{m != n} P_m / (eta_n - eta_m)``.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    _require_hermitian_pair(pair)
    part = partition if partition is not None else spectral_partition(pair.H_meas)
    _check_partition(pair, part)
    H = np.asarray(pair.H)
    hnorm = spectral_norm(H)
    if len(part) > 1:
        gap = float(np.min(np.diff(part.etas)))
        if abs(lam) * hnorm >= gap / 4:
            raise ValueError(f"|lam|*||H|| = {abs(lam) * hnorm:.3g} is not below min gap/4 = {gap / 4:.3g}")
    degeneracy_tol = 1e-8 * max(1.0, hnorm)
    expansions, corrections, owner = [], [], []
    for n, (eta, B) in enumerate(zip(part.etas, part.bases)):
        R = np.zeros_like(H)
        for m, (eta_m, P_m) in enumerate(zip(part.etas, part.projectors)):
            if m != n:
                R = R + P_m / (eta - eta_m)
        h = B.conj().T @ H @ B
        shifts, C = herm_eig(h)
        if len(shifts) > 1 and np.min(np.diff(shifts)) <= degeneracy_tol:
            raise HigherOrderDegeneracyError(
                f"model {pair.name}: degeneracy at eta={eta:.6g} is not lifted at first order"
            )
        for a in range(len(shifts)):
            u = B @ C[:, a]
            P_alpha = np.outer(u, u.conj())
            terms = [eta, float(shifts[a])]
            if order == 2:
                terms.append(float(np.real(u.conj() @ H @ R @ H @ u)))
            expansions.append(terms)
            corrections.append(R @ H @ P_alpha + P_alpha @ H @ R)
            owner.append(n)
    return PerturbativeSpectrum(float(lam), order, expansions, corrections, owner)


def rotation_schedule(A, B, segments: int) -> list:
    """Segments ``cos(theta) A + sin(theta) B`` for theta from 0 to pi/2.

    With ``segments=2`` this is the abrupt schedule ``[A, B]``.
    """
    if segments < 1:
        raise ValueError("segments must be positive")
    A = as_square(A, "A")
    B = as_square(B, "B")
    if segments == 1:
        return [A]
    thetas = np.linspace(0.0, np.pi / 2, segments)
    return [np.cos(th) * A + np.sin(th) * B for th in thetas]


def _track(prev_P, partition: ZenoPartition) -> int:
    overlaps = np.array([np.real(np.trace(prev_P @ P)) for P in partition.projectors])
    order = np.argsort(overlaps)[::-1]
    if len(order) > 1 and overlaps[order[0]] - overlaps[order[1]] <= 1e-6:
        raise SectorTrackingError(
            f"ambiguous sector tracking: overlaps {overlaps[order[0]]:.6g} and {overlaps[order[1]]:.6g}"
        )
    return int(order[0])


def adiabatic_transport_defect(schedule, H, K: float, t: float, eta: float = 0.0) -> float:
    """Intertwining defect for a piecewise-constant ``H_meas(t)``.

    ``schedule`` lists the measurement Hamiltonians of equal-length segments
    covering ``[0, t]``.  The sector of the first segment whose eigenvalue is
    closest to ``eta`` is followed from segment to segment by maximal overlap
    ``Tr[P_n P_m]``; the result is ``||U P_n(0) - P_n(t) U||``.
    """
    if len(schedule) == 0:
        raise ValueError("schedule must contain at least one segment")
    H = as_square(H, "H")
    _require_hermitian(H, "H")
    partitions = [spectral_partition(Hm) for Hm in schedule]
    if len({len(p) for p in partitions}) != 1:
        raise SectorTrackingError("schedule segments have different numbers of Zeno sectors")
    idx = partitions[0].sector_of(eta)
    P_start = partitions[0].projectors[idx]
    current = P_start
    for part in partitions[1:]:
        current = part.projectors[_track(current, part)]
    dt = t / len(schedule)
    U = np.eye(H.shape[0], dtype=complex)
    for Hm in schedule:
        U = propagator(H + K * np.asarray(Hm, dtype=complex), dt) @ U
    return spectral_norm(U @ P_start - current @ U)
