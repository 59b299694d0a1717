"""Gray-labelled constellations with unit average energy.

Point ``j`` of every constellation carries the bit label ``bits[j]``, which is
the binary expansion of ``j`` (MSB first), so index arithmetic and bit labels
stay interchangeable everywhere downstream.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError, SizeError

MODULATIONS = ("qpsk", "8psk", "16qam")


@dataclass(frozen=True, eq=False)
class Constellation:
    name: str
    points: np.ndarray  # (L,) complex, mean |x|^2 == 1
    bits: np.ndarray  # (L, K) uint8 labels

    @property
    def order(self) -> int:
        return self.points.size

    @property
    def bits_per_symbol(self) -> int:
        return self.bits.shape[1]

    @property
    def signed_bits(self) -> np.ndarray:
        """Labels with 0 -> -1 and 1 -> +1, shape (L, K)."""
        return 2.0 * self.bits.astype(np.float64) - 1.0

    def scaled(self, power: float) -> np.ndarray:
        return self.points * np.sqrt(power)

    def bits_to_indices(self, bits) -> np.ndarray:
        bits = np.asarray(bits, dtype=np.int64).ravel()
        K = self.bits_per_symbol
        if bits.size % K:
            raise SizeError(f"{bits.size} bits is not a multiple of {K} bits/symbol for {self.name}")
        weights = 1 << np.arange(K - 1, -1, -1)
        return bits.reshape(-1, K) @ weights

    def indices_to_bits(self, idx) -> np.ndarray:
        return self.bits[np.asarray(idx, dtype=np.int64)].reshape(-1)

    def hard_decision(self, symbols, power: float = 1.0) -> np.ndarray:
        """Nearest-point indices for symbols drawn at average power ``power``."""
        pts = self.scaled(power)
        d = np.abs(np.asarray(symbols)[:, None] - pts[None, :])
        return np.argmin(d, axis=1)


def _gray(n: np.ndarray) -> np.ndarray:
    return n ^ (n >> 1)


def _labels(L: int) -> np.ndarray:
    K = int(np.log2(L))
    j = np.arange(L)
    return ((j[:, None] >> np.arange(K - 1, -1, -1)[None, :]) & 1).astype(np.uint8)


def _qpsk() -> Constellation:
    bits = _labels(4)
    b = bits.astype(np.float64)
    pts = ((1 - 2 * b[:, 0]) + 1j * (1 - 2 * b[:, 1])) / np.sqrt(2)
    return Constellation("qpsk", pts, bits)


def _qam16() -> Constellation:
    # I from (b0, b2), Q from (b1, b3): per-axis Gray PAM-4
    bits = _labels(16)
    b = bits.astype(np.float64)
    i_amp = (1 - 2 * b[:, 0]) * (2 - (1 - 2 * b[:, 2]))
    q_amp = (1 - 2 * b[:, 1]) * (2 - (1 - 2 * b[:, 3]))
    return Constellation("16qam", (i_amp + 1j * q_amp) / np.sqrt(10), bits)


def _psk8() -> Constellation:
    bits = _labels(8)
    # label j sits at the ring position whose Gray code equals j
    ring = np.arange(8)
    pos = np.empty(8, dtype=np.int64)
    pos[_gray(ring)] = ring
    pts = np.exp(1j * (np.pi / 4 * pos + np.pi / 8))
    return Constellation("8psk", pts, bits)


@lru_cache(maxsize=None)
def get_constellation(name: str) -> Constellation:
    key = name.lower().replace("-", "")
    if key == "qpsk":
        return _qpsk()
    if key == "16qam":
        return _qam16()
    if key == "8psk":
        return _psk8()
    raise ConfigError(f"unknown modulation {name!r}; expected one of {MODULATIONS}")
