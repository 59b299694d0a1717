"""Doubly-selective channel with integer delay/Doppler taps.

Time domain: ``r[q] = sum_i h_i z^{k_i (q - l_i)} s[(q - l_i) mod NM] + w``,
``z = exp(j 2 pi / NM)``.

In the DD domain every path is a scaled, phase-rotated permutation: row
``(m, n)`` of ``H`` reads column ``([m - l]_M, [n - k]_N)`` with coefficient
``h z^{k (m - l)}``, times ``exp(-j 2 pi [n - k]_N / N)`` when ``m < l``
(the delay shift crossed a time-slot boundary). ``H`` therefore has exactly
one nonzero per path in every row and column.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, SizeError
from .otfs import TimeSignal


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    gains: np.ndarray  # (P,) complex
    delays: np.ndarray  # (P,) int
    dopplers: np.ndarray  # (P,) int
    N: int
    M: int

    def __post_init__(self):
        g = np.atleast_1d(np.asarray(self.gains, dtype=np.complex128))
        l = np.atleast_1d(np.asarray(self.delays, dtype=np.int64))
        k = np.atleast_1d(np.asarray(self.dopplers, dtype=np.int64))
        if not g.shape == l.shape == k.shape:
            raise SizeError("gains, delays and dopplers must have the same length")
        object.__setattr__(self, "gains", g)
        object.__setattr__(self, "delays", l)
        object.__setattr__(self, "dopplers", k)

    @property
    def P(self) -> int:
        return int(self.gains.size)

    @property
    def NM(self) -> int:
        return self.N * self.M

    @property
    def paths(self) -> list[tuple[complex, int, int]]:
        return [(complex(h), int(l), int(k)) for h, l, k in zip(self.gains, self.delays, self.dopplers)]

    @cached_property
    def taps(self) -> "DDTaps":
        return dd_taps(self)

    @cached_property
    def matrix(self) -> sp.csr_array:
        return effective_dd_matrix(self).tocsr()

    def apply_dd(self, x: np.ndarray) -> np.ndarray:
        return self.taps.apply(x)

    def to_json(self) -> str:
        return json.dumps(
            {
                "N": self.N,
                "M": self.M,
                "paths": [{"re": h.real, "im": h.imag, "l": l, "k": k} for h, l, k in self.paths],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "ChannelRealization":
        d = json.loads(text)
        paths = d["paths"]
        return cls(
            np.array([p["re"] + 1j * p["im"] for p in paths], dtype=np.complex128),
            np.array([p["l"] for p in paths], dtype=np.int64),
            np.array([p["k"] for p in paths], dtype=np.int64),
            d["N"],
            d["M"],
        )


@dataclass(frozen=True, eq=False)
class DDTaps:
    """Path-indexed view of ``H``: ``y[d] = sum_i coefs[i, d] x[cols[i, d]]``.

    ``rows`` is the inverse permutation: ``rows[i, cols[i, d]] == d``.
    """

    cols: np.ndarray  # (P, NM) int64
    rows: np.ndarray  # (P, NM) int64
    coefs: np.ndarray  # (P, NM) complex128

    @property
    def P(self) -> int:
        return self.cols.shape[0]

    def apply(self, x: np.ndarray) -> np.ndarray:
        if self.P == 0:
            return np.zeros(self.cols.shape[1], dtype=np.complex128)
        return np.einsum("pd,pd->d", self.coefs, np.asarray(x)[self.cols])


def dd_coefficient(h, l, k, m, n, N: int, M: int):
    """Coefficient of ``H`` at output cell(s) ``(m, n)`` for path ``(h, l, k)``."""
    m = np.asarray(m)
    n = np.asarray(n)
    src_n = np.mod(n - k, N)
    phase = np.exp(2j * np.pi * k * (m - l) / (N * M))
    phase = np.where(m < l, phase * np.exp(-2j * np.pi * src_n / N), phase)
    return h * phase


def dd_taps(ch: ChannelRealization) -> DDTaps:
    N, M, NM = ch.N, ch.M, ch.NM
    d = np.arange(NM)
    m, n = d % M, d // M
    cols = np.empty((ch.P, NM), dtype=np.int64)
    rows = np.empty((ch.P, NM), dtype=np.int64)
    coefs = np.empty((ch.P, NM), dtype=np.complex128)
    for i, (h, l, k) in enumerate(ch.paths):
        cols[i] = np.mod(n - k, N) * M + np.mod(m - l, M)
        rows[i, cols[i]] = d
        coefs[i] = dd_coefficient(h, l, k, m, n, N, M)
    return DDTaps(cols, rows, coefs)


def sample_channel(rng: np.random.Generator, P: int, l_max: int, k_max: int, N: int, M: int) -> ChannelRealization:
    """Uniform power profile, ``h_i ~ CN(0, 1/P)``, distinct lattice taps."""
    lattice = (l_max + 1) * (2 * k_max + 1)
    if P < 1 or P > lattice:
        raise ConfigError(f"P={P} paths need 1 <= P <= {lattice} distinct (l, k) taps")
    cells = rng.choice(lattice, size=P, replace=False)
    delays = cells // (2 * k_max + 1)
    dopplers = cells % (2 * k_max + 1) - k_max
    gains = (rng.standard_normal(P) + 1j * rng.standard_normal(P)) * np.sqrt(0.5 / P)
    return ChannelRealization(gains, delays, dopplers, N, M)


def apply_time_domain(
    ch: ChannelRealization, s: TimeSignal | np.ndarray, rng: np.random.Generator | None = None, sigma2: float = 0.0
) -> TimeSignal:
    samples = s.samples if isinstance(s, TimeSignal) else np.asarray(s, dtype=np.complex128)
    NM = ch.NM
    if samples.shape != (NM,):
        raise SizeError(f"expected {NM} samples, got {samples.shape}")
    q = np.arange(NM)
    r = np.zeros(NM, dtype=np.complex128)
    for h, l, k in ch.paths:
        r += h * np.exp(2j * np.pi * k * (q - l) / NM) * np.roll(samples, l)
    if sigma2 > 0:
        if rng is None:
            raise ValueError("a random generator is required when sigma2 > 0")
        r += np.sqrt(sigma2 / 2) * (rng.standard_normal(NM) + 1j * rng.standard_normal(NM))
    return TimeSignal(r, ch.N, ch.M)


def effective_dd_matrix(ch: ChannelRealization) -> sp.coo_array:
    """Sparse ``H`` in COO form, entries ordered row-major."""
    taps = ch.taps
    NM = ch.NM
    if taps.P == 0:
        return sp.coo_array((NM, NM), dtype=np.complex128)
    rows = np.repeat(np.arange(NM), taps.P)
    cols = taps.cols.T.ravel()
    vals = taps.coefs.T.ravel()
    order = np.lexsort((cols, rows))
    return sp.coo_array((vals[order], (rows[order], cols[order])), shape=(NM, NM))


def received_pilot_relation(ch: ChannelRealization, frame, j: int, i: int) -> complex:
    """Predicted noiseless ``Y[m_pj + l_i, n_pj + k_i]`` from path ``i`` alone.

    Uses the full pilot-cell content, so for superimposed pilots the data
    symbol riding on the pilot is included.
    """
    m_p, n_p = frame.pilot_positions[j]
    h, l, k = ch.paths[i]
    m = (m_p + l) % ch.M
    n = (n_p + k) % ch.N
    return complex(dd_coefficient(h, l, k, m, n, ch.N, ch.M) * frame.grid[m_p, n_p])
