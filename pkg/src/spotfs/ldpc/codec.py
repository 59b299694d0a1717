"""Systematic LDPC encoding and decoding with rate matching.

A mother code ``H = [H_i | H_p]`` of length ``n0`` with ``k0`` information
bits is matched to ``(R_b, R_c)`` by

* shortening: the last ``s = k0 - R_b`` information bits are fixed to zero,
  never sent, and enter the decoder with LLR ``+clip``;
* puncturing: the last ``p = n0 - s - R_c`` parity bits are not sent and
  enter the decoder with LLR ``0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from importlib import resources

import numpy as np
import scipy.sparse as sp

from ..errors import ConfigError, SizeError
from . import gf2
from .alist import read_alist
from .bp import belief_propagation
from .qc import qc_parity_check

LLR_CLIP = 30.0
QC_LIFT = 256

# name -> (mb, nb, Z); every fixture is the seed-0 QC construction
FIXTURES = {
    "toy96": (6, 12, 8),
    "r0.75_n8192": (8, 32, 256),
    "r0.5_n8192": (16, 32, 256),
}


@dataclass(frozen=True, eq=False)
class TannerGraph:
    e_var: np.ndarray  # variable of each edge, edges in check order
    c_ptr: np.ndarray
    v_edges: np.ndarray  # edge ids grouped by variable, ascending within a group
    v_ptr: np.ndarray

    @classmethod
    def from_matrix(cls, H) -> "TannerGraph":
        H = sp.csr_array(H)
        H.sort_indices()
        e_var = H.indices.astype(np.int64)
        c_ptr = H.indptr.astype(np.int64)
        v_edges = np.argsort(e_var, kind="stable").astype(np.int64)
        v_ptr = np.zeros(H.shape[1] + 1, dtype=np.int64)
        np.cumsum(np.bincount(e_var, minlength=H.shape[1]), out=v_ptr[1:])
        return cls(e_var, c_ptr, v_edges, v_ptr)

    @property
    def n_edges(self) -> int:
        return int(self.e_var.size)


@dataclass(frozen=True, eq=False)
class MotherCode:
    H: sp.csr_array
    name: str = ""

    @property
    def n0(self) -> int:
        return self.H.shape[1]

    @property
    def m0(self) -> int:
        return self.H.shape[0]

    @property
    def k0(self) -> int:
        return self.n0 - self.m0

    @cached_property
    def graph(self) -> TannerGraph:
        return TannerGraph.from_matrix(self.H)

    @cached_property
    def parity_map(self) -> np.ndarray:
        dense = self.H.toarray().astype(np.uint8)
        return gf2.systematic_parity_map(dense[:, self.k0 :], dense[:, : self.k0])

    def encode_full(self, info: np.ndarray) -> np.ndarray:
        parity = gf2.packed_matvec(self.parity_map, info)
        return np.concatenate([np.asarray(info, dtype=np.uint8), parity])

    def syndrome(self, c: np.ndarray) -> np.ndarray:
        return (self.H @ np.asarray(c, dtype=np.int64)) % 2


@dataclass(frozen=True, eq=False)
class CodeSpec:
    """A mother code matched to ``R_b`` information and ``R_c`` coded bits."""

    mother: MotherCode
    R_b: int
    R_c: int

    def __post_init__(self):
        if self.R_b < 1 or self.R_c <= self.R_b:
            raise ConfigError(f"need 0 < R_b < R_c, got R_b={self.R_b}, R_c={self.R_c}")
        if self.shortening < 0 or self.puncturing < 0:
            raise ConfigError(
                f"mother code ({self.mother.n0}, {self.mother.k0}) cannot be matched to "
                f"R_b={self.R_b}, R_c={self.R_c}"
            )

    @property
    def parity_check(self) -> sp.csr_array:
        return self.mother.H

    @property
    def shortening(self) -> int:
        return self.mother.k0 - self.R_b

    @property
    def puncturing(self) -> int:
        return self.mother.n0 - self.shortening - self.R_c

    @property
    def r_c(self) -> float:
        return self.R_b / self.R_c

    @cached_property
    def sent_index(self) -> np.ndarray:
        """Mother-code positions carried on the channel, in transmit order."""
        k0, n0 = self.mother.k0, self.mother.n0
        n_par = n0 - k0 - self.puncturing
        return np.concatenate([np.arange(self.R_b), k0 + np.arange(n_par)]).astype(np.int64)

    def decoder_mults(self, iterations: int) -> int:
        return 2 * self.mother.graph.n_edges * iterations

    def __repr__(self) -> str:
        return f"CodeSpec({self.mother.name or 'custom'}, R_b={self.R_b}, R_c={self.R_c})"


@dataclass
class DecodeResult:
    bits_hat: np.ndarray  # (R_b,) uint8
    llr_out: np.ndarray  # (R_c,) posterior LLRs on the sent bits
    converged: bool
    iterations: int
    mults: int


def encode(spec: CodeSpec, info_bits) -> np.ndarray:
    info = np.asarray(info_bits, dtype=np.uint8).ravel()
    if info.size != spec.R_b:
        raise SizeError(f"expected {spec.R_b} information bits, got {info.size}")
    full = np.zeros(spec.mother.k0, dtype=np.uint8)
    full[: spec.R_b] = info
    return spec.mother.encode_full(full)[spec.sent_index]


def decode(
    spec: CodeSpec,
    llr_in,
    I_LDPC: int = 20,
    minsum: bool = False,
    clip: float = LLR_CLIP,
    backend: str | None = None,
) -> DecodeResult:
    llr_in = np.asarray(llr_in, dtype=np.float64).ravel()
    if llr_in.size != spec.R_c:
        raise SizeError(f"expected {spec.R_c} LLRs, got {llr_in.size}")
    full = np.zeros(spec.mother.n0)
    full[spec.R_b : spec.mother.k0] = clip
    full[spec.sent_index] = np.clip(llr_in, -clip, clip)
    post, it, ok = belief_propagation(full, spec.mother.graph, I_LDPC, minsum=minsum, backend=backend)
    llr_out = post[spec.sent_index]
    bits_hat = (post[: spec.R_b] < 0).astype(np.uint8)
    return DecodeResult(bits_hat, llr_out, ok, it, spec.decoder_mults(it))


@lru_cache(maxsize=None)
def load_fixture(name: str) -> MotherCode:
    if name not in FIXTURES:
        raise ConfigError(f"unknown fixture code {name!r}; available: {sorted(FIXTURES)}")
    path = resources.files("spotfs.ldpc") / "codes" / f"{name}.alist"
    with resources.as_file(path) as p:
        return MotherCode(read_alist(p), name)


@lru_cache(maxsize=None)
def qc_mother(mb: int, nb: int, Z: int, seed: int = 0) -> MotherCode:
    return MotherCode(qc_parity_check(mb, nb, Z, seed), f"qc{mb}x{nb}z{Z}")


def _fits(code: MotherCode, R_b: int, R_c: int) -> bool:
    s = code.k0 - R_b
    return s >= 0 and code.n0 - s - R_c >= 0


@lru_cache(maxsize=None)
def code_for(R_b: int, R_c: int) -> CodeSpec:
    """Smallest shipped mother code that matches, else a QC code built to fit."""
    for name in ("r0.75_n8192", "r0.5_n8192"):
        mc = load_fixture(name)
        if _fits(mc, R_b, R_c) and mc.n0 - R_c <= mc.n0 // 8:
            return CodeSpec(mc, R_b, R_c)
    kb = max(1, math.ceil(R_b / QC_LIFT))
    mb = max(3, math.ceil((R_c - R_b) / QC_LIFT))
    Z = QC_LIFT
    if R_c < 4 * QC_LIFT:
        Z = max(4, 1 << max(2, math.ceil(math.log2(max(R_c, 16) / 16))))
        kb = math.ceil(R_b / Z)
        mb = max(3, math.ceil((R_c - R_b) / Z))
    return CodeSpec(qc_mother(mb, kb + mb, Z), R_b, R_c)
