"""Pulsed measurement protocols.

Selective protocol: N projections P at intervals tau = t/N keep only the
branch that stays in Ran P, ``V_N(t) = (P U(tau) P)^N``.  Nonselective
protocol: every measurement applies ``rho -> sum_n P_n rho P_n`` and keeps
all outcomes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ZenoPartition, propagator
from .errors import HermiticityError, InvalidStateError, ShapeError, StationaryStateError
from .linalg import HERMITICITY_TOL, as_square, herm_eig, hermiticity_defect


@dataclass(frozen=True, eq=False)
class PulsedResult:
    N: int
    tau: float
    survival: float
    state: np.ndarray
    gamma_eff: float


def _hermitian(H, what="H"):
    H = as_square(H, what)
    if hermiticity_defect(H) > HERMITICITY_TOL:
        raise HermiticityError(f"{what} must be Hermitian")
    return H


def _unit_state(psi0, dim):
    psi = np.asarray(psi0, dtype=complex).reshape(-1)
    if psi.size != dim:
        raise ShapeError(f"state has length {psi.size}, expected {dim}")
    if abs(np.linalg.norm(psi) - 1.0) > 1e-12:
        raise InvalidStateError("state must have unit norm")
    return psi


def zeno_time(H, psi0) -> float:
    """``(<H^2> - <H>^2)^(-1/2)`` in the state ``psi0``."""
    H = _hermitian(H)
    psi = _unit_state(psi0, H.shape[0])
    Hpsi = H @ psi
    mean = np.real(np.vdot(psi, Hpsi))
    variance = np.real(np.vdot(Hpsi, Hpsi)) - mean**2
    if variance <= 1e-14:
        raise StationaryStateError(f"energy variance {variance:.3g} vanishes: infinite Zeno time")
    return 1.0 / math.sqrt(variance)


def _check_projector(P, dim):
    P = as_square(P, "P")
    if P.shape[0] != dim:
        raise ShapeError("projector dimension differs from H")
    scale = max(1.0, np.linalg.norm(P))
    if np.linalg.norm(P @ P - P) > 1e-10 * scale or np.linalg.norm(P - P.conj().T) > 1e-10 * scale:
        raise InvalidStateError("P is not an orthogonal projector")
    return P


# survival below (16 eps)**2 is a rounded amplitude zero (exact Rabi node)
_ZERO_SURVIVAL = (16 * np.finfo(float).eps) ** 2


def _rate(survival, total_time):
    if total_time == 0:
        return 0.0
    if survival <= _ZERO_SURVIVAL:
        return math.inf
    return max(0.0, -math.log(survival) / total_time)


def pulsed_selective(H, P, psi0, N: int, t: float) -> PulsedResult:
    """Survival after N selective projections onto ``Ran P`` in time ``t``.

    The returned state ``V_N psi0 psi0^H V_N^H`` is not normalized; its
    trace is the survival probability.
    """
    H = _hermitian(H)
    P = _check_projector(P, H.shape[0])
    psi = _unit_state(psi0, H.shape[0])
    if np.linalg.norm(P @ psi - psi) > 1e-10:
        raise InvalidStateError("initial state lies outside the range of P")
    if int(N) != N or N < 1:
        raise ValueError("N must be a positive integer")
    N = int(N)
    tau = t / N
    step = P @ propagator(H, tau) @ P
    phi = np.linalg.matrix_power(step, N) @ psi
    survival = float(np.real(np.vdot(phi, phi)))
    return PulsedResult(N, tau, survival, np.outer(phi, phi.conj()), _rate(survival, t))


def _check_density(rho, dim):
    rho = as_square(rho, "rho0")
    if rho.shape[0] != dim:
        raise ShapeError("density matrix dimension differs from H")
    if np.linalg.norm(rho - rho.conj().T) > 1e-10:
        raise InvalidStateError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > 1e-10:
        raise InvalidStateError("density matrix trace is not 1")
    if herm_eig(0.5 * (rho + rho.conj().T)).eigenvalues.min() < -1e-10:
        raise InvalidStateError("density matrix is not positive semidefinite")
    return rho


def dephase(rho, partition: ZenoPartition) -> np.ndarray:
    """Nonselective measurement ``sum_n P_n rho P_n``."""
    return sum(P @ rho @ P for P in partition.projectors)


def pulsed_nonselective(H, partition: ZenoPartition, rho0, N: int, t: float):
    """Nonselective pulsed evolution.

    The initial state is measured, then N free evolutions of length t/N each
    followed by a measurement are applied.  Returns ``(rho_t, p)`` with
    ``p[n] = Tr[rho_t P_n]``.
    """
    H = _hermitian(H)
    if partition.dim != H.shape[0]:
        raise ShapeError("partition dimension differs from H")
    rho = _check_density(rho0, H.shape[0])
    if int(N) != N or N < 1:
        raise ValueError("N must be a positive integer")
    U = propagator(H, t / int(N))
    Ud = U.conj().T
    rho = dephase(rho, partition)
    for _ in range(int(N)):
        rho = dephase(U @ rho @ Ud, partition)
    probs = np.array([np.real(np.trace(rho @ P)) for P in partition.projectors])
    return rho, probs


def effective_rate_pulsed(H, P, psi0, tau_values, t: float | None = None) -> list:
    """``gamma_eff(tau) = -log p / (N tau)`` for each interval ``tau``.

    With ``t`` given, ``N = round(t / tau)`` pulses are applied; otherwise a
    single interval is used.  A vanishing survival gives ``math.inf``.
    """
    rates = []
    for tau in tau_values:
        if not tau > 0:
            raise ValueError("tau values must be positive")
        N = 1 if t is None else max(1, int(round(t / tau)))
        res = pulsed_selective(H, P, psi0, N, N * tau)
        rates.append(res.gamma_eff)
    return rates
