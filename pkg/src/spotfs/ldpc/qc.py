"""Quasi-cyclic LDPC codes with a dual-diagonal parity part.

``H`` is an ``mb x nb`` array of ``Z x Z`` circulants. The last ``mb``
block columns form the parity part: one weight-3 column with shifts
``(1, 0, 1)`` at block rows ``0, mb//2, mb-1`` followed by an identity
staircase, which makes ``H_p`` invertible over GF(2). Information block
columns have weight 3 with shifts drawn so that no 4-cycle is created.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

EMPTY = -1


def _creates_4cycle(base: np.ndarray, col: int, Z: int) -> bool:
    rows = np.flatnonzero(base[:, col] != EMPTY)
    for other in range(base.shape[1]):
        if other == col:
            continue
        shared = rows[base[rows, other] != EMPTY]
        for a in range(shared.size):
            for b in range(a + 1, shared.size):
                r1, r2 = shared[a], shared[b]
                d = base[r1, col] - base[r2, col] - base[r1, other] + base[r2, other]
                if d % Z == 0:
                    return True
    return False


def qc_base_matrix(mb: int, nb: int, Z: int, seed: int = 0, col_weight: int = 3, attempts: int = 2000) -> np.ndarray:
    """Block shift table, ``-1`` for an all-zero block."""
    if mb < 3 or nb <= mb:
        raise ValueError("need mb >= 3 block rows and at least one information block column")
    kb = nb - mb
    base = np.full((mb, nb), EMPTY, dtype=np.int64)
    base[0, kb] = 1 % Z
    base[mb // 2, kb] = 0
    base[mb - 1, kb] = 1 % Z
    for j in range(1, mb):
        base[j - 1, kb + j] = 0
        base[j, kb + j] = 0
    rng = np.random.default_rng([seed, mb, nb, Z])
    w = min(col_weight, mb)
    for c in range(kb):
        for _ in range(attempts):
            rows = rng.choice(mb, size=w, replace=False)
            base[:, c] = EMPTY
            base[rows, c] = rng.integers(0, Z, size=w)
            if not _creates_4cycle(base, c, Z):
                break
        else:
            raise RuntimeError(f"no 4-cycle-free shifts found for block column {c} (Z={Z})")
    return base


def expand(base: np.ndarray, Z: int) -> sp.csr_array:
    mb, nb = base.shape
    rows, cols = [], []
    t = np.arange(Z)
    for i in range(mb):
        for j in range(nb):
            s = base[i, j]
            if s == EMPTY:
                continue
            rows.append(i * Z + t)
            cols.append(j * Z + (t + s) % Z)
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    return sp.csr_array((np.ones(r.size, dtype=np.uint8), (r, c)), shape=(mb * Z, nb * Z))


def qc_parity_check(mb: int, nb: int, Z: int, seed: int = 0) -> sp.csr_array:
    return expand(qc_base_matrix(mb, nb, Z, seed), Z)
