"""OTFS modulation with rectangular pulses.

With ``G_tx = G_rx = I`` the ISFFT + Heisenberg chain reduces to
``s = (F_N^H kron I_M) vec(X)``: an N-point unitary inverse DFT along each
delay row. Nothing NM x NM is ever formed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .errors import SizeError


@dataclass(frozen=True, eq=False)
class TimeSignal:
    samples: np.ndarray
    N: int
    M: int

    def __post_init__(self):
        if self.samples.shape != (self.N * self.M,):
            raise SizeError(f"time signal must have {self.N * self.M} samples, got {self.samples.shape}")


def modulate(frame, N: int | None = None, M: int | None = None) -> TimeSignal:
    """DD grid (``DDFrame`` or ``M x N`` array) to NM time samples."""
    grid = getattr(frame, "grid", frame)
    grid = np.asarray(grid, dtype=np.complex128)
    if grid.ndim != 2:
        raise SizeError(f"expected an M x N grid, got shape {grid.shape}")
    M_, N_ = grid.shape
    if (N is not None and N != N_) or (M is not None and M != M_):
        raise SizeError(f"grid is {M_}x{N_}, configured {M}x{N}")
    S = sfft.ifft(grid, axis=1, norm="ortho")
    return TimeSignal(S.ravel(order="F"), N_, M_)


def demodulate(r: TimeSignal | np.ndarray, N: int | None = None, M: int | None = None) -> np.ndarray:
    """NM received samples to the ``M x N`` DD grid."""
    if isinstance(r, TimeSignal):
        samples, N, M = r.samples, r.N, r.M
    else:
        samples = np.asarray(r, dtype=np.complex128)
        if N is None or M is None:
            raise SizeError("N and M are required for a bare sample vector")
    if samples.shape != (N * M,):
        raise SizeError(f"expected {N * M} samples, got {samples.shape}")
    R = samples.reshape(M, N, order="F")
    return sfft.fft(R, axis=1, norm="ortho")
