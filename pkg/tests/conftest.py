import numpy as np
import pytest

from spotfs import _accel


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(params=["numba", "numpy"])
def backend(request, monkeypatch):
    """Run a test once per kernel backend via the environment flag."""
    if request.param == "numba" and not _accel.HAS_NUMBA:
        pytest.skip("numba not installed")
    monkeypatch.setenv("SPOTFS_DISABLE_NUMBA", "0" if request.param == "numba" else "1")
    return request.param


def dft(n):
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def dense_time_channel(ch):
    """G = sum_i h_i Pi^{l_i} Delta^{k_i} built entry by entry."""
    NM = ch.NM
    q = np.arange(NM)
    G = np.zeros((NM, NM), dtype=complex)
    for h, l, k in ch.paths:
        Pi = np.roll(np.eye(NM), l, axis=0)
        Delta = np.diag(np.exp(2j * np.pi * k * q / NM))
        G += h * Pi @ Delta
    return G


def dense_dd_matrix(ch):
    FN = dft(ch.N)
    A = np.kron(FN, np.eye(ch.M))
    return A @ dense_time_channel(ch) @ A.conj().T


def awgn(rng, n, sigma2=1.0):
    return np.sqrt(sigma2 / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion(request):
    """Record one pass/fail summary line for an acceptance criterion."""

    def report(number: int, ok: bool, detail: str):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _CRITERIA[number] = line
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[n])
