import numpy as np
import pytest


def peres3_survival(K, t, omega=1.0):
    """Closed-form survival of |1> for the three-level model."""
    s = K**2 + omega**2
    return (K**2 + omega**2 * np.cos(np.sqrt(s) * t)) ** 2 / s**2


def nonherm_survival(K, t, omega=1.0):
    """Closed-form survival of |1> under the absorbing two-level Hamiltonian."""
    t = np.asarray(t, dtype=float)
    r = np.sqrt(complex(K**2 - omega**2))
    if abs(r) < 1e-12:
        amp = (1 + K * t) * np.exp(-K * t)
    else:
        amp = 0.5 * (1 + K / r) * np.exp(-(K - r) * t) + 0.5 * (1 - K / r) * np.exp(-(K + r) * t)
    return np.abs(amp) ** 2


def random_hermitian(rng, n, scale=1.0):
    X = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (X + X.conj().T) / 2


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def pytest_terminal_summary(terminalreporter):
    module = __import__("sys").modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
