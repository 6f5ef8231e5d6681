"""Catalogue of Hamiltonian models written as ``H_K = H + K * H_meas``.

Every model is addressed by name through :func:`build_model`.  Parameter
names are lower case so they can be passed straight from the command line
(``--param omega=1``).  Tensor-product bases enumerate the last factor
(detector qubit, photon number) fastest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import ModelError, ShapeError
from .linalg import HERMITICITY_TOL, as_square, hermiticity_defect

SIGMA1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA3 = np.array([[1, 0], [0, -1]], dtype=complex)
P0_QUBIT = np.diag([1.0, 0.0]).astype(complex)
P1_QUBIT = np.diag([0.0, 1.0]).astype(complex)
I2 = np.eye(2, dtype=complex)


@dataclass(frozen=True, eq=False)
class HamiltonianPair:
    """System Hamiltonian ``H`` and measurement Hamiltonian ``H_meas``.

    ``total()`` returns ``H + K * H_meas``.  ``name`` and ``params`` record
    where the pair came from; they are informational.
    """

    dim: int
    H: np.ndarray
    H_meas: np.ndarray
    K: float
    hermitian_H: bool
    hermitian_meas: bool
    basis_labels: tuple
    name: str = "custom"
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for label, M in (("H", self.H), ("H_meas", self.H_meas)):
            if M.shape != (self.dim, self.dim):
                raise ShapeError(f"{label} has shape {M.shape}, expected ({self.dim}, {self.dim})")
        if len(self.basis_labels) != self.dim:
            raise ShapeError("basis_labels length differs from dim")
        if self.hermitian_H != (hermiticity_defect(self.H) <= HERMITICITY_TOL):
            raise ValueError("hermitian_H flag inconsistent with H")
        if self.hermitian_meas != (hermiticity_defect(self.H_meas) <= HERMITICITY_TOL):
            raise ValueError("hermitian_meas flag inconsistent with H_meas")

    @classmethod
    def from_matrices(cls, H, H_meas, K, basis_labels=None, name="custom", params=None):
        H = as_square(H, "H").copy()
        H_meas = as_square(H_meas, "H_meas").copy()
        dim = H.shape[0]
        if basis_labels is None:
            basis_labels = [f"|{i}>" for i in range(dim)]
        H.setflags(write=False)
        H_meas.setflags(write=False)
        return cls(
            dim=dim,
            H=H,
            H_meas=H_meas,
            K=float(K),
            hermitian_H=hermiticity_defect(H) <= HERMITICITY_TOL,
            hermitian_meas=hermiticity_defect(H_meas) <= HERMITICITY_TOL,
            basis_labels=tuple(basis_labels),
            name=name,
            params=dict(params or {}),
        )

    def total(self, K: float | None = None) -> np.ndarray:
        k = self.K if K is None else K
        return self.H + k * self.H_meas

    @property
    def hermitian(self) -> bool:
        return self.hermitian_H and self.hermitian_meas

    def with_K(self, K: float) -> "HamiltonianPair":
        params = dict(self.params)
        return HamiltonianPair.from_matrices(self.H, self.H_meas, K, self.basis_labels, self.name, params)

    def index_of(self, label: str) -> int:
        try:
            return self.basis_labels.index(label)
        except ValueError:
            raise KeyError(f"no basis state labelled {label!r} in model {self.name}") from None

    def basis_state(self, which) -> np.ndarray:
        """Unit vector selected by basis index or label."""
        i = self.index_of(which) if isinstance(which, str) else int(which)
        if not 0 <= i < self.dim:
            raise IndexError(f"basis index {i} out of range for dim {self.dim}")
        v = np.zeros(self.dim, dtype=complex)
        v[i] = 1.0
        return v


@dataclass(frozen=True)
class ModelSpec:
    name: str
    params: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class SectorDecomposition:
    """Excitation-number sectors as ``(N, basis indices)`` pairs."""

    sectors: tuple

    def indices(self, excitation: int) -> list:
        for n, idx in self.sectors:
            if n == excitation:
                return list(idx)
        raise KeyError(f"no sector with excitation number {excitation}")


# ---------------------------------------------------------------------------
# builders


def _op(dim, entries):
    M = np.zeros((dim, dim), dtype=complex)
    for (i, j), v in entries.items():
        M[i, j] += v
    return M


def _sym(dim, i, j):
    """``|i><j| + |j><i|`` (zero-based)."""
    return _op(dim, {(i, j): 1.0, (j, i): 1.0})


def _rabi2(p):
    H = p["omega"] * SIGMA1
    return H, np.zeros((2, 2), complex), p["k"], ["|0>", "|1>"]


def _nonherm(p):
    H = p["omega"] * SIGMA1
    H_meas = np.diag([0.0, -2.0j])
    return H, H_meas, p["k"], ["|1>", "|2>"]


def _peres3(p):
    H = p["omega"] * _sym(3, 0, 1)
    return H, _sym(3, 1, 2), p["k"], ["|1>", "|2>", "|3>"]


def _fourlevel(p):
    sigma1 = _sym(4, 0, 1)
    tau1 = _sym(4, 1, 2)
    tau1p = _sym(4, 2, 3)
    labels = ["|1>", "|2>", "|3>", "|4>"]
    if p["reading"] == 0:
        return p["omega"] * sigma1 + p["kprime"] * tau1p, tau1, p["k"], labels
    return p["omega"] * sigma1 + p["k"] * tau1, tau1p, p["kprime"], labels


_QUBIT_LABELS = ["|00>", "|01>", "|10>", "|11>"]


def _twoqubit(p):
    Hs = p["omega"] * SIGMA1 + p["delta"] * SIGMA3
    Hd = p["b"] * SIGMA3
    plus = np.array([1, 1], dtype=complex) / math.sqrt(2)
    minus = np.array([1, -1], dtype=complex) / math.sqrt(2)
    Vd = p["eta1"] * np.outer(plus, plus) + p["eta2"] * np.outer(minus, minus)
    H = np.kron(Hs, I2) + np.kron(I2, Hd)
    return H, np.kron(P1_QUBIT, Vd), p["k"], _QUBIT_LABELS


def _twoqubit_peres(p):
    H = p["omega"] * np.kron(SIGMA1, P0_QUBIT)
    return H, np.kron(P1_QUBIT, SIGMA1), p["k"], _QUBIT_LABELS


def _twoqubit_peres_fixed(p):
    H = p["omega"] * np.kron(SIGMA1, I2)
    return H, np.kron(P1_QUBIT, SIGMA1), p["k"], _QUBIT_LABELS


def cavity_basis(n_max: int) -> list:
    """Product basis ``(n, j1, j2)`` with the photon number fastest."""
    return [(n, j1, j2) for j1 in range(3) for j2 in range(3) for n in range(n_max + 1)]


def cavity_label(state) -> str:
    n, j1, j2 = state
    return f"|{n}{j1}{j2}>"


def cavity_measurement(g: float, kappa: float, n_max: int) -> np.ndarray:
    """``i g sum_i (b |2><1|_i - b^dag |1><2|_i) - i kappa b^dag b``."""
    states = cavity_basis(n_max)
    index = {s: i for i, s in enumerate(states)}
    M = np.zeros((len(states), len(states)), dtype=complex)
    for (n, j1, j2), col in index.items():
        M[col, col] += -1j * kappa * n
        atoms = [j1, j2]
        for a in (0, 1):
            if atoms[a] == 1 and n >= 1:
                new = list(atoms)
                new[a] = 2
                M[index[(n - 1, *new)], col] += 1j * g * math.sqrt(n)
            if atoms[a] == 2 and n < n_max:
                new = list(atoms)
                new[a] = 1
                M[index[(n + 1, *new)], col] += -1j * g * math.sqrt(n + 1)
    return M


def cavity_drive(n_max: int, atom: int = 1, levels=(0, 1)) -> np.ndarray:
    """Weak single-atom drive ``|a><b| + h.c.`` on one atom, identity elsewhere."""
    if atom not in (1, 2):
        raise ModelError("atom must be 1 or 2")
    lo, hi = levels
    states = cavity_basis(n_max)
    index = {s: i for i, s in enumerate(states)}
    D = np.zeros((len(states), len(states)), dtype=complex)
    for (n, j1, j2), col in index.items():
        atoms = [j1, j2]
        j = atoms[atom - 1]
        for src, dst in ((lo, hi), (hi, lo)):
            if j == src:
                new = list(atoms)
                new[atom - 1] = dst
                D[index[(n, *new)], col] += 1.0
    return D


def _cavity(p):
    n_max = p["nmax"]
    H_meas = cavity_measurement(p["g"], p["kappa"], n_max)
    H = p["drive"] * cavity_drive(n_max)
    labels = [cavity_label(s) for s in cavity_basis(n_max)]
    return H, H_meas, p["k"], labels


def _decay(p):
    tz, gamma = p["tau_z"], p["gamma"]
    H = _op(3, {(0, 0): p["omega1"], (0, 1): 1 / tz, (1, 0): 1 / tz, (1, 1): -2j / (tz**2 * gamma)})
    return H, _sym(3, 1, 2), p["k"], ["|1>", "|2>", "|3>"]


def _flat_continuum(p):
    pair = dilate_flat_continuum(p["omega"], p["k"], p["w"], p["m"])
    return pair.H, pair.H_meas, pair.K, list(pair.basis_labels)


def _flat_defaults(p):
    omega, k = abs(p["omega"]), p["k"]
    if "w" not in p:
        p["w"] = 20.0 * max(omega, k)
    if "m" not in p:
        if omega == 0:
            raise ModelError("flat_continuum: m must be given when omega = 0")
        dw_max = (omega**2 / k) / 20.0
        p["m"] = int(math.ceil(2.0 * p["w"] / dw_max)) + 1


@dataclass(frozen=True)
class _Entry:
    builder: Callable
    required: tuple
    defaults: Mapping[str, float]
    summary: str
    checks: Mapping[str, str] = field(default_factory=dict)
    fill: Callable | None = None


CATALOGUE = {
    "rabi2": _Entry(_rabi2, ("omega",), {"k": 0.0}, "two-level Rabi oscillation, H = omega*sigma1"),
    "nonherm": _Entry(
        _nonherm, ("omega", "k"), {}, "Rabi pair with absorbing level, H_meas = -2i|2><2|"
    ),
    "flat_continuum": _Entry(
        _flat_continuum,
        ("omega", "k"),
        {},
        "Hermitian dilation: level |2> coupled to M modes on [-W, W]",
        {"k": "positive", "w": "positive", "m": "int>=2"},
        _flat_defaults,
    ),
    "peres3": _Entry(_peres3, ("omega",), {"k": 0.0}, "three-level model, H_meas = |2><3| + |3><2|"),
    "fourlevel": _Entry(
        _fourlevel,
        ("omega", "k", "kprime"),
        {"reading": 0},
        "watched cook; reading=0: H_meas = tau1, reading=1: H_meas = tau1'",
        {"reading": "0|1"},
    ),
    "twoqubit": _Entry(
        _twoqubit,
        ("omega",),
        {"k": 0.0, "b": 1.0, "eta1": 1.0, "eta2": -1.0, "delta": 0.0},
        "system (x) detector qubits, H_meas = P1 (x) V_d",
    ),
    "twoqubit_peres": _Entry(
        _twoqubit_peres, ("omega",), {"k": 0.0}, "three-level model as two qubits, H = omega*sigma1 (x) P0"
    ),
    "twoqubit_peres_fixed": _Entry(
        _twoqubit_peres_fixed, ("omega",), {"k": 0.0}, "two-qubit version with H = omega*sigma1 (x) 1"
    ),
    "cavity": _Entry(
        _cavity,
        ("g", "kappa"),
        {"nmax": 2, "k": 1.0, "drive": 0.0},
        "two three-level atoms in a leaky cavity (non-Hermitian H_meas)",
        {"g": "nonnegative", "kappa": "nonnegative", "nmax": "int>=1"},
    ),
    "decay": _Entry(
        _decay,
        ("tau_z", "gamma"),
        {"k": 0.0, "omega1": 0.0},
        "spontaneous decay with a watched level |3>",
        {"tau_z": "positive", "gamma": "positive"},
    ),
}

MODEL_NAMES = tuple(CATALOGUE)


def model_parameters(name: str) -> tuple:
    """(required names, optional defaults) for a catalogue model."""
    entry = _lookup(name)
    return entry.required, dict(entry.defaults)


def _lookup(name):
    try:
        return CATALOGUE[name]
    except KeyError:
        raise ModelError(f"unknown model {name!r}; known models: {', '.join(MODEL_NAMES)}") from None


def _check(name, key, value, rule):
    if rule == "positive" and not value > 0:
        raise ModelError(f"{name}: parameter {key} must be positive, got {value}")
    if rule == "nonnegative" and not value >= 0:
        raise ModelError(f"{name}: parameter {key} must be nonnegative, got {value}")
    if rule.startswith("int>="):
        low = int(rule[5:])
        if value != int(value) or value < low:
            raise ModelError(f"{name}: parameter {key} must be an integer >= {low}, got {value}")
    if rule == "0|1" and value not in (0, 1):
        raise ModelError(f"{name}: parameter {key} must be 0 or 1, got {value}")


def resolve_params(spec: ModelSpec) -> dict:
    """Validated parameter map with defaults filled in."""
    entry = _lookup(spec.name)
    allowed = set(entry.required) | set(entry.defaults) | set(entry.checks)
    p = {}
    for key, value in spec.params.items():
        if key not in allowed:
            raise ModelError(f"{spec.name}: unknown parameter {key!r}; allowed: {', '.join(sorted(allowed))}")
        try:
            value = float(value)
        except (TypeError, ValueError):
            raise ModelError(f"{spec.name}: parameter {key} is not a number: {value!r}") from None
        if not math.isfinite(value):
            raise ModelError(f"{spec.name}: parameter {key} must be finite")
        p[key] = value
    missing = [k for k in entry.required if k not in p]
    if missing:
        raise ModelError(f"{spec.name}: missing required parameter(s) {', '.join(missing)}")
    for key, value in entry.defaults.items():
        p.setdefault(key, float(value))
    if entry.fill is not None:
        entry.fill(p)
    for key, rule in entry.checks.items():
        if key in p:
            _check(spec.name, key, p[key], rule)
    for key in ("nmax", "m", "reading"):
        if key in p:
            p[key] = int(p[key])
    return p


def build_model(spec: ModelSpec | str, **params) -> HamiltonianPair:
    """Construct a catalogue model.

    ``build_model("peres3", omega=1, k=3)`` is shorthand for
    ``build_model(ModelSpec("peres3", {"omega": 1, "k": 3}))``.
    """
    if isinstance(spec, str):
        spec = ModelSpec(spec, params)
    elif params:
        raise TypeError("pass parameters either in the ModelSpec or as keywords, not both")
    p = resolve_params(spec)
    H, H_meas, K, labels = CATALOGUE[spec.name].builder(p)
    return HamiltonianPair.from_matrices(H, H_meas, K, labels, spec.name, p)


def dilate_flat_continuum(omega: float, K: float, W: float, M: int) -> HamiltonianPair:
    """Two-level system whose level |2> is coupled to a discretized flat band.

    Mode energies are ``M`` uniform points on ``[-W, W]`` and each couples to
    |2> with strength ``sqrt(2K/pi) * sqrt(dw)``, ``dw = 2W/(M-1)``.  The
    couplings live in ``H_meas`` and the returned pair has ``K = 1``.
    """
    if int(M) != M or M < 2:
        raise ModelError(f"flat_continuum: M must be an integer >= 2, got {M}")
    if not W > 0:
        raise ModelError(f"flat_continuum: W must be positive, got {W}")
    if not K > 0:
        raise ModelError(f"flat_continuum: K must be positive, got {K}")
    M = int(M)
    omegas = np.linspace(-W, W, M)
    dw = 2.0 * W / (M - 1)
    g = math.sqrt(2.0 * K / math.pi) * math.sqrt(dw)
    dim = M + 2
    H = np.zeros((dim, dim), dtype=complex)
    H[0, 1] = H[1, 0] = omega
    H[2:, 2:] = np.diag(omegas)
    H_meas = np.zeros((dim, dim), dtype=complex)
    H_meas[1, 2:] = g
    H_meas[2:, 1] = g
    labels = ["|1>", "|2>"] + [f"|w{j}>" for j in range(M)]
    params = {"omega": float(omega), "k": float(K), "w": float(W), "m": M}
    return HamiltonianPair.from_matrices(H, H_meas, 1.0, labels, "flat_continuum", params)


def flat_continuum_modes(pair: HamiltonianPair) -> np.ndarray:
    """Mode energies of a dilated pair."""
    return pair.H.diagonal()[2:].real.copy()


def excitation_number(label: str) -> int:
    """Photons plus excited atoms for a cavity label ``|n j1 j2>``."""
    n, j1, j2 = (int(c) for c in label.strip("|>"))
    return n + (j1 == 2) + (j2 == 2)


def excitation_sectors(cavity_pair: HamiltonianPair, n_max: int | None = None) -> SectorDecomposition:
    """Split the cavity basis by excitation number ``N = 0 .. 2 + n_max``."""
    if cavity_pair.name != "cavity":
        raise ModelError(f"excitation_sectors needs a cavity model, got {cavity_pair.name!r}")
    model_nmax = int(cavity_pair.params.get("nmax", len(cavity_pair.basis_labels) // 9 - 1))
    if n_max is None:
        n_max = model_nmax
    if n_max != model_nmax:
        raise ModelError(f"n_max={n_max} does not match the model's photon cutoff {model_nmax}")
    numbers = [excitation_number(lab) for lab in cavity_pair.basis_labels]
    sectors = []
    for N in range(0, n_max + 3):
        idx = tuple(i for i, x in enumerate(numbers) if x == N)
        if idx:
            sectors.append((N, idx))
    return SectorDecomposition(tuple(sectors))
