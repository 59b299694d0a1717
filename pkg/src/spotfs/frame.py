"""Delay-Doppler frame layouts for embedded and superimposed pilots.

Grids are ``M x N`` (delay rows, Doppler columns) and are vectorised
column-wise: cell ``(m, n)`` sits at flat index ``n * M + m``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np

from .constellation import get_constellation
from .errors import ConfigError, PlacementError, SizeError
from .power import PowerAllocation


class PilotKind(str, Enum):
    EP = "ep"
    SP = "sp"


@dataclass(frozen=True)
class SchemeId:
    kind: PilotKind
    n_pilots: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", PilotKind(self.kind))
        if self.n_pilots < 1:
            raise ConfigError("a scheme needs at least one pilot")
        if self.kind is PilotKind.EP and self.n_pilots != 1:
            raise ConfigError("the embedded-pilot scheme uses exactly one pilot")

    @classmethod
    def ep(cls) -> "SchemeId":
        return cls(PilotKind.EP, 1)

    @classmethod
    def sp(cls, n_pilots: int = 1) -> "SchemeId":
        return cls(PilotKind.SP, n_pilots)

    @classmethod
    def parse(cls, text: str) -> "SchemeId":
        """``"ep"``, ``"sp"`` (one pilot) or ``"sp9"``."""
        t = text.strip().lower()
        if t == "ep":
            return cls.ep()
        if t.startswith("sp"):
            rest = t[2:]
            return cls.sp(int(rest) if rest else 1)
        raise ConfigError(f"unknown scheme {text!r}")

    @property
    def is_ep(self) -> bool:
        return self.kind is PilotKind.EP

    @property
    def label(self) -> str:
        return "ep" if self.is_ep else f"sp{self.n_pilots}"


def max_feasible_pilots(N: int, M: int, l_max: int, k_max: int) -> int:
    return (M // (l_max + 1)) * (N // (2 * k_max + 1))


def _cyclic(a: int, b: int, n: int) -> int:
    d = abs(a - b) % n
    return min(d, n - d)


def pilots_compatible(positions, N: int, M: int, l_max: int, k_max: int) -> bool:
    """True if no two pilots' shifted images can land on the same cell.

    The image of a pilot at ``(m, n)`` covers ``m..m+l_max`` (mod M) by
    ``n-k_max..n+k_max`` (mod N), so two pilots are compatible when their
    cyclic separation exceeds ``l_max`` in delay or ``2*k_max`` in Doppler.
    """
    pos = list(positions)
    for a in range(len(pos)):
        for b in range(a + 1, len(pos)):
            (ma, na), (mb, nb) = pos[a], pos[b]
            if _cyclic(ma, mb, M) <= l_max and _cyclic(na, nb, N) <= 2 * k_max:
                return False
    return True


def place_pilots(scheme: SchemeId, N: int, M: int, l_max: int, k_max: int) -> list[tuple[int, int]]:
    """Deterministic pilot coordinates ``(m_p, n_p)``.

    A single pilot (EP, or SP with one pilot) sits at the grid centre.
    Several superimposed pilots fill a row-major lattice with delay stride
    ``l_max+1`` and Doppler stride ``2*k_max+1`` offset by ``k_max``.
    """
    if scheme.n_pilots == 1:
        return [(M // 2, N // 2)]
    cap = max_feasible_pilots(N, M, l_max, k_max)
    if scheme.n_pilots > cap:
        raise PlacementError(
            f"{scheme.n_pilots} pilots do not fit a {M}x{N} grid with l_max={l_max}, "
            f"k_max={k_max}: max feasible = {cap}"
        )
    rows = M // (l_max + 1)
    cols = N // (2 * k_max + 1)
    lattice = [
        (a * (l_max + 1), k_max + b * (2 * k_max + 1)) for a in range(rows) for b in range(cols)
    ]
    return lattice[: scheme.n_pilots]


@dataclass(frozen=True, eq=False)
class FrameLayout:
    """Everything the receiver knows about a frame before seeing data."""

    scheme: SchemeId
    N: int
    M: int
    l_max: int
    k_max: int
    pilot_positions: tuple[tuple[int, int], ...]
    pilot_mask: np.ndarray
    guard_mask: np.ndarray

    @classmethod
    def create(cls, scheme: SchemeId, N: int, M: int, l_max: int, k_max: int) -> "FrameLayout":
        if l_max < 0 or k_max < 0:
            raise ConfigError("l_max and k_max must be non-negative")
        if l_max >= M or 2 * k_max >= N:
            raise ConfigError(f"channel spread (l_max={l_max}, k_max={k_max}) exceeds the {M}x{N} grid")
        positions = tuple(place_pilots(scheme, N, M, l_max, k_max))
        pilot_mask = np.zeros((M, N), dtype=bool)
        guard_mask = np.zeros((M, N), dtype=bool)
        for m, n in positions:
            pilot_mask[m, n] = True
        if scheme.is_ep:
            if 2 * l_max + 1 > M or 4 * k_max + 1 > N:
                raise ConfigError(f"EP guard ({2 * l_max + 1}x{4 * k_max + 1}) does not fit a {M}x{N} grid")
            m_p, n_p = positions[0]
            rows = (m_p + np.arange(-l_max, l_max + 1)) % M
            cols = (n_p + np.arange(-2 * k_max, 2 * k_max + 1)) % N
            guard_mask[np.ix_(rows, cols)] = True
            guard_mask[m_p, n_p] = False
        return cls(scheme, N, M, l_max, k_max, positions, pilot_mask, guard_mask)

    @property
    def NM(self) -> int:
        return self.N * self.M

    @cached_property
    def data_mask(self) -> np.ndarray:
        if self.scheme.is_ep:
            return ~(self.pilot_mask | self.guard_mask)
        return np.ones((self.M, self.N), dtype=bool)

    @cached_property
    def data_index(self) -> np.ndarray:
        """Flat (column-wise) indices of data cells, ascending."""
        return np.flatnonzero(self.data_mask.ravel(order="F"))

    @cached_property
    def pilot_index(self) -> np.ndarray:
        return np.array([n * self.M + m for m, n in self.pilot_positions], dtype=np.int64)

    @property
    def data_positions(self) -> list[tuple[int, int]]:
        return [(int(i % self.M), int(i // self.M)) for i in self.data_index]

    @property
    def n_data(self) -> int:
        return int(self.data_index.size)

    @property
    def n_pilots(self) -> int:
        return len(self.pilot_positions)

    def pilot_vector(self, x_p: complex) -> np.ndarray:
        v = np.zeros(self.NM, dtype=np.complex128)
        v[self.pilot_index] = x_p
        return v


@dataclass(frozen=True, eq=False)
class DDFrame:
    layout: FrameLayout
    grid: np.ndarray  # (M, N) complex
    x_p: complex
    data_symbols: np.ndarray  # (n_data,) in data_index order

    @property
    def scheme(self) -> SchemeId:
        return self.layout.scheme

    @property
    def pilot_mask(self) -> np.ndarray:
        return self.layout.pilot_mask

    @property
    def guard_mask(self) -> np.ndarray:
        return self.layout.guard_mask

    @property
    def pilot_positions(self):
        return self.layout.pilot_positions

    @property
    def data_positions(self):
        return self.layout.data_positions

    def vectorize(self) -> np.ndarray:
        return self.grid.ravel(order="F").copy()

    def pilot_vector(self) -> np.ndarray:
        return self.layout.pilot_vector(self.x_p)

    def data_vector(self) -> np.ndarray:
        v = np.zeros(self.layout.NM, dtype=np.complex128)
        v[self.layout.data_index] = self.data_symbols
        return v

    def dump(self, path: str | os.PathLike) -> None:
        """Write ``<path>.bin`` (row-major complex64) and ``<path>.json``."""
        base = os.fspath(path)
        self.grid.astype(np.complex64).tofile(base + ".bin")
        meta = {
            "scheme": self.scheme.label,
            "N": self.layout.N,
            "M": self.layout.M,
            "l_max": self.layout.l_max,
            "k_max": self.layout.k_max,
            "x_p": [float(np.real(self.x_p)), float(np.imag(self.x_p))],
            "pilot_positions": [list(p) for p in self.pilot_positions],
            "pilot_mask": self.pilot_mask.astype(int).tolist(),
            "guard_mask": self.guard_mask.astype(int).tolist(),
        }
        with open(base + ".json", "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=1)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "DDFrame":
        base = os.fspath(path)
        with open(base + ".json", encoding="utf-8") as fh:
            meta = json.load(fh)
        layout = FrameLayout.create(
            SchemeId.parse(meta["scheme"]), meta["N"], meta["M"], meta["l_max"], meta["k_max"]
        )
        grid = np.fromfile(base + ".bin", dtype=np.complex64).astype(np.complex128)
        grid = grid.reshape(layout.M, layout.N)
        x_p = complex(*meta["x_p"])
        flat = grid.ravel(order="F").copy()
        flat[layout.pilot_index] -= x_p
        return cls(layout, grid, x_p, flat[layout.data_index])


def map_bits_to_symbols(bits, modulation: str, sigma_d2: float) -> np.ndarray:
    const = get_constellation(modulation)
    return const.scaled(sigma_d2)[const.bits_to_indices(bits)]


def build_frame(layout: FrameLayout, alloc: PowerAllocation, data_symbols) -> DDFrame:
    data_symbols = np.asarray(data_symbols, dtype=np.complex128).ravel()
    if data_symbols.size != layout.n_data:
        raise SizeError(f"{layout.scheme.label} frame holds {layout.n_data} data symbols, got {data_symbols.size}")
    x_p = complex(alloc.pilot_amplitude)
    flat = np.zeros(layout.NM, dtype=np.complex128)
    flat[layout.data_index] = data_symbols
    flat[layout.pilot_index] += x_p
    grid = flat.reshape(layout.M, layout.N, order="F")
    return DDFrame(layout, grid, x_p, data_symbols)
