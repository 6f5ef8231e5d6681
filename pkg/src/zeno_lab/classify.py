"""QZE / IZE classification.

Oscillating systems are compared curve against curve: grid points where the
coupled survival exceeds the free one form QZE intervals, points where it
falls below form IZE intervals.  Unstable systems are compared by decay
rate: fitted effective rate against a golden-rule rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Trajectory
from .errors import HermiticityError, ShapeError
from .linalg import HERMITICITY_TOL, as_square, gen_eig, herm_eig, hermiticity_defect

QZE = "QZE"
IZE = "IZE"
MIXED = "MIXED"
NONE = "NONE"

DOMINANT_FRACTION = 0.5
MINOR_FRACTION = 0.25


@dataclass(frozen=True)
class ZenoClassification:
    verdict: str
    intervals: list = field(default_factory=list)
    poincare_time: float = math.nan
    rate_based: tuple | None = None
    lengths: dict = field(default_factory=dict)


def poincare_time(H, psi0=None, weight_tol: float = 1e-12) -> float:
    """``2 pi / (smallest nonzero eigenvalue gap)`` of ``H``.

    With ``psi0`` only eigenvalues carrying weight above ``weight_tol`` in
    the state enter.  Non-Hermitian input uses real parts.  Returns
    ``math.inf`` if no nonzero gap exists.
    """
    A = as_square(H, "H")
    if hermiticity_defect(A) <= HERMITICITY_TOL:
        w, V = herm_eig(A)
        weights = None if psi0 is None else np.abs(V.conj().T @ np.asarray(psi0, complex)) ** 2
    else:
        w, V = gen_eig(A)
        weights = None
        if psi0 is not None:
            psi = np.asarray(psi0, complex)
            weights = np.abs(np.linalg.solve(V, psi)) * np.abs(psi.conj() @ V)
        w = w.real
    w = np.asarray(w, float)
    if weights is not None:
        w = w[weights > weight_tol]
    w = np.sort(w)
    scale = max(1.0, float(np.max(np.abs(w)))) if w.size else 1.0
    gaps = np.diff(w)
    gaps = gaps[gaps > 1e-10 * scale]
    if gaps.size == 0:
        return math.inf
    return 2.0 * math.pi / float(gaps.min())


def _runs(mask):
    runs = []
    start = None
    for i, flag in enumerate(mask):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, len(mask) - 1))
    return runs


def verdict_from_lengths(qze: float, ize: float, period: float) -> str:
    if qze >= DOMINANT_FRACTION * period and ize < MINOR_FRACTION * period:
        return QZE
    if ize >= DOMINANT_FRACTION * period and qze < MINOR_FRACTION * period:
        return IZE
    if qze >= MINOR_FRACTION * period and ize >= MINOR_FRACTION * period:
        return MIXED
    return NONE


def classify_intervals(
    p_K: Trajectory, p_0: Trajectory, tol: float = 1e-9, poincare_time: float | None = None
) -> ZenoClassification:
    """Interval-based comparison of a coupled and a reference survival curve.

    Maximal runs of grid points with ``p_K > p_0 + tol`` (QZE) or
    ``p_K < p_0 - tol`` (IZE) inside ``[t_0, t_0 + poincare_time]`` become
    intervals (endpoints are the first and last grid point of the run); each
    sample accounts for one grid step of length.  A kind
    wins if it covers at least half the Poincaré time while the other stays
    below a quarter; both above a quarter is MIXED.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    t = np.asarray(p_K.times, float)
    t0 = np.asarray(p_0.times, float)
    if t.shape != t0.shape or not np.allclose(t, t0, rtol=0, atol=1e-12 * max(1.0, abs(t[-1]))):
        raise ShapeError("trajectories are sampled on different time grids")
    if poincare_time is None:
        poincare_time = float(t[-1] - t[0]) if t.size > 1 else 0.0
    if not poincare_time > 0:
        raise ValueError("poincare_time must be positive")
    keep = t <= t[0] + poincare_time * (1 + 1e-12)
    t = t[keep]
    d = np.asarray(p_K.survival, float)[keep] - np.asarray(p_0.survival, float)[keep]
    step = float(np.median(np.diff(t))) if t.size > 1 else 0.0
    intervals = []
    lengths = {QZE: 0.0, IZE: 0.0}
    for kind, mask in ((QZE, d > tol), (IZE, d < -tol)):
        for a, b in _runs(mask):
            intervals.append((float(t[a]), float(t[b]), kind))
            lengths[kind] += (b - a + 1) * step
    intervals.sort()
    verdict = verdict_from_lengths(lengths[QZE], lengths[IZE], poincare_time)
    return ZenoClassification(verdict, intervals, float(poincare_time), None, lengths)


def fit_effective_rate(traj: Trajectory, window) -> float:
    """Least-squares slope of ``-log p(t)`` over ``window = (t_lo, t_hi)``."""
    lo, hi = window
    t = np.asarray(traj.times, float)
    if lo >= hi or lo < t[0] - 1e-12 or hi > t[-1] + 1e-12:
        raise ValueError(f"window {window} is not inside the trajectory range [{t[0]}, {t[-1]}]")
    mask = (t >= lo) & (t <= hi)
    if mask.sum() < 8:
        raise ValueError(f"only {int(mask.sum())} samples in window; at least 8 required")
    p = np.asarray(traj.survival, float)[mask]
    if np.any(p <= 0):
        raise ValueError("survival must be strictly positive inside the fit window")
    slope, _ = np.polyfit(t[mask], -np.log(p), 1)
    return float(slope)


def lorentzian(x, width):
    return (width / math.pi) / (np.asarray(x) ** 2 + width**2)


def golden_rule_rate(H0_diag, H_int, a: int, broadening: float | None = None) -> float:
    """Discretized golden rule ``2 pi sum_f |<f|H_int|a>|^2 L(w_a - w_f)``.

    ``L`` is a normalized Lorentzian of half-width ``broadening``; by default
    twice the median spacing of the coupled final levels.
    """
    w = np.asarray(H0_diag, float).reshape(-1)
    V = as_square(H_int, "H_int")
    if V.shape[0] != w.size:
        raise ShapeError("H_int and H0_diag sizes differ")
    if hermiticity_defect(V) > HERMITICITY_TOL:
        raise HermiticityError("H_int must be Hermitian")
    if abs(V[a, a]) > 1e-10:
        raise ValueError(f"diagonal coupling <a|H_int|a> = {V[a, a]} must vanish")
    coupling = np.abs(V[:, a]) ** 2
    coupling[a] = 0.0
    finals = np.flatnonzero(coupling > 0)
    if finals.size == 0:
        return 0.0
    if broadening is None:
        levels = np.unique(w[finals])
        if levels.size < 2:
            raise ValueError("broadening must be given when fewer than two final levels are coupled")
        broadening = 2.0 * float(np.median(np.diff(levels)))
    if not broadening > 0:
        raise ValueError("broadening must be positive")
    return float(2 * math.pi * np.sum(coupling[finals] * lorentzian(w[a] - w[finals], broadening)))


def classify_rates(gamma: float, gamma_eff: float, tol: float = 0.05) -> str:
    """QZE if ``gamma_eff < gamma (1 - tol)``, IZE if above ``gamma (1 + tol)``."""
    if gamma < 0 or gamma_eff < 0:
        raise ValueError("rates must be nonnegative")
    if gamma_eff < gamma * (1 - tol):
        return QZE
    if gamma_eff > gamma * (1 + tol):
        return IZE
    return NONE


def rate_classification(gamma: float, gamma_eff: float, tol: float = 0.05) -> ZenoClassification:
    return ZenoClassification(classify_rates(gamma, gamma_eff, tol), [], math.nan, (gamma, gamma_eff))
