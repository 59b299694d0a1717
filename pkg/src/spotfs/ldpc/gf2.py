"""Bit-packed GF(2) linear algebra for systematic encoding."""

from __future__ import annotations

import numpy as np

from .. import _accel


def pack_rows(A: np.ndarray) -> np.ndarray:
    """``(r, c)`` 0/1 array to ``(r, ceil(c/64))`` uint64, bit ``j`` in word ``j // 64``."""
    A = np.asarray(A, dtype=np.uint8)
    r, c = A.shape
    width = -(-c // 64) * 64
    padded = np.zeros((r, width), dtype=np.uint8)
    padded[:, :c] = A
    return np.packbits(padded, axis=1, bitorder="little").view("<u8").copy()


def unpack_rows(W: np.ndarray, c: int) -> np.ndarray:
    b = np.unpackbits(np.ascontiguousarray(W).view(np.uint8), axis=1, bitorder="little")
    return b[:, :c]


@_accel.njit
def _eliminate_numba(W, n_pivots):
    r = W.shape[0]
    for j in range(n_pivots):
        word = j // 64
        bit = np.uint64(1) << np.uint64(j % 64)
        piv = -1
        for i in range(j, r):
            if W[i, word] & bit:
                piv = i
                break
        if piv < 0:
            return j
        if piv != j:
            tmp = W[j].copy()
            W[j] = W[piv]
            W[piv] = tmp
        for i in range(r):
            if i != j and (W[i, word] & bit):
                for w in range(word, W.shape[1]):
                    W[i, w] ^= W[j, w]
    return n_pivots


def _eliminate_numpy(W, n_pivots):
    r = W.shape[0]
    for j in range(n_pivots):
        word, bit = j // 64, np.uint64(1) << np.uint64(j % 64)
        col = (W[:, word] & bit) != 0
        cand = np.flatnonzero(col[j:])
        if cand.size == 0:
            return j
        piv = j + cand[0]
        if piv != j:
            W[[j, piv]] = W[[piv, j]]
            col[[j, piv]] = col[[piv, j]]
        col[j] = False
        W[col, word:] ^= W[j, word:]
    return n_pivots


def gauss_jordan(W: np.ndarray, n_pivots: int) -> int:
    """Reduce the first ``n_pivots`` columns of packed ``W`` to the identity in place.

    Returns the number of pivots found; less than ``n_pivots`` means the
    leading square block is singular.
    """
    if _accel.use_numba():
        return int(_eliminate_numba(W, n_pivots))
    return _eliminate_numpy(W, n_pivots)


def systematic_parity_map(H_p: np.ndarray, H_i: np.ndarray) -> np.ndarray:
    """Packed ``P = H_p^{-1} H_i`` so that parity ``= P u (mod 2)``."""
    m = H_p.shape[0]
    if H_p.shape != (m, m) or H_i.shape[0] != m:
        raise ValueError("H_p must be square with as many rows as H_i")
    W = pack_rows(np.hstack([H_p, H_i]))
    if gauss_jordan(W, m) < m:
        raise ValueError("parity part of H is singular over GF(2)")
    return pack_rows(unpack_rows(W, m + H_i.shape[1])[:, m:])


def packed_matvec(P: np.ndarray, u: np.ndarray) -> np.ndarray:
    """``P u mod 2`` for packed ``P`` (rows) and a 0/1 vector ``u``."""
    uw = pack_rows(np.asarray(u, dtype=np.uint8)[None, :])[0]
    return (np.bitwise_count(P & uw[None, :]).sum(axis=1) & 1).astype(np.uint8)
