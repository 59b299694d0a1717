"""Column-oriented sparse parity-check text format.

::

    <n_cols> <n_rows>
    <1-indexed rows of column 1, space separated>
    ...
    <1-indexed rows of column n_cols>
    <blank line>

Every column needs at least one check. Lines starting with ``#`` before
the header are comments. The first
``n_cols - n_rows`` columns are the systematic (information) positions.
"""

from __future__ import annotations

import os

import numpy as np
import scipy.sparse as sp


def write_alist(path: str | os.PathLike, H: sp.spmatrix | sp.sparray, comment: str | None = None) -> None:
    H = sp.csc_array(H)
    H.eliminate_zeros()
    m, n = H.shape
    empty = np.flatnonzero(np.diff(H.indptr) == 0)
    if empty.size:
        # an empty neighbour list would read back as the terminator
        raise ValueError(f"column {int(empty[0])} has no checks; the format cannot represent it")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        fh.write(f"{n} {m}\n")
        for j in range(n):
            rows = np.sort(H.indices[H.indptr[j] : H.indptr[j + 1]])
            fh.write(" ".join(str(int(r) + 1) for r in rows) + "\n")
        fh.write("\n")


def read_alist(path: str | os.PathLike) -> sp.csr_array:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    i = 0
    while lines[i].startswith("#"):
        i += 1
    n, m = (int(t) for t in lines[i].split())
    body = lines[i + 1 : i + 1 + n]
    if len(body) < n or any(not b.strip() for b in body):
        raise ValueError(f"{path}: expected {n} non-empty column lines")
    rows, cols = [], []
    for j, line in enumerate(body):
        idx = [int(t) - 1 for t in line.split()]
        if min(idx) < 0 or max(idx) >= m:
            raise ValueError(f"{path}: column {j + 1} references a check outside 1..{m}")
        rows.extend(idx)
        cols.extend([j] * len(idx))
    data = np.ones(len(rows), dtype=np.uint8)
    return sp.csr_array((data, (rows, cols)), shape=(m, n))
