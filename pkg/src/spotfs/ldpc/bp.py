"""Flooding belief propagation on a parity-check graph.

Edges are stored in check order (the CSR layout of ``H``). The check update
uses ``phi(x) = -log(tanh(x / 2))``, its own inverse, so the extrinsic
magnitude is ``phi(sum_{others} phi(|m|))``. Exact zeros are tracked
separately: one zero among the other inputs makes the outgoing message zero,
as ``tanh(0) = 0`` would. Min-sum replaces the magnitude with a scaled
minimum.
"""

from __future__ import annotations

import numpy as np

from .. import _accel

PHI_FLOOR = 1e-12
PHI_CEIL = 60.0


@_accel.njit
def _phi(x):
    x = min(max(x, PHI_FLOOR), PHI_CEIL)
    return -np.log(np.tanh(0.5 * x))


@_accel.njit
def _syndrome_ok(post, e_var, c_ptr):
    for c in range(c_ptr.size - 1):
        par = 0
        for e in range(c_ptr[c], c_ptr[c + 1]):
            if post[e_var[e]] < 0:
                par ^= 1
        if par:
            return False
    return True


@_accel.njit
def _reliable(post):
    for v in range(post.size):
        if post[v] == 0.0:
            return False
    return True


@_accel.njit
def _bp_numba(llr, e_var, c_ptr, v_edges, v_ptr, max_iter, minsum, ms_scale):
    n = llr.size
    m = c_ptr.size - 1
    E = e_var.size
    v2c = np.empty(E)
    for e in range(E):
        v2c[e] = llr[e_var[e]]
    c2v = np.zeros(E)
    ph = np.zeros(E)
    post = llr.copy()
    if _syndrome_ok(post, e_var, c_ptr) and _reliable(post):
        return post, 0, True
    it = 0
    ok = False
    while it < max_iter:
        it += 1
        for c in range(m):
            a = c_ptr[c]
            b = c_ptr[c + 1]
            zeros = 0
            neg = 0
            S = 0.0
            min1 = np.inf
            min2 = np.inf
            arg1 = -1
            for e in range(a, b):
                x = v2c[e]
                if x == 0.0:
                    zeros += 1
                    continue
                if x < 0:
                    neg += 1
                ax = abs(x)
                if minsum:
                    if ax < min1:
                        min2 = min1
                        min1 = ax
                        arg1 = e
                    elif ax < min2:
                        min2 = ax
                else:
                    ph[e] = _phi(ax)
                    S += ph[e]
            for e in range(a, b):
                x = v2c[e]
                own_zero = x == 0.0
                if zeros - (1 if own_zero else 0) > 0:
                    c2v[e] = 0.0
                    continue
                s_neg = neg - (1 if x < 0 else 0)
                sign = -1.0 if (s_neg & 1) else 1.0
                if minsum:
                    mag = min2 if e == arg1 else min1
                    if mag == np.inf:
                        mag = PHI_CEIL
                    c2v[e] = sign * ms_scale * mag
                else:
                    rest = S if own_zero else S - ph[e]
                    c2v[e] = sign * _phi(rest)
        for v in range(n):
            s = llr[v]
            for t in range(v_ptr[v], v_ptr[v + 1]):
                s += c2v[v_edges[t]]
            post[v] = s
            for t in range(v_ptr[v], v_ptr[v + 1]):
                e = v_edges[t]
                v2c[e] = s - c2v[e]
        ok = _syndrome_ok(post, e_var, c_ptr) and _reliable(post)
        if ok:
            break
    return post, it, ok


def _phi_np(x):
    x = np.clip(x, PHI_FLOOR, PHI_CEIL)
    return -np.log(np.tanh(0.5 * x))


def _syndrome_ok_np(post, e_var, c_ptr):
    neg = (post[e_var] < 0).astype(np.int64)
    return not np.any(np.add.reduceat(neg, c_ptr[:-1]) & 1)


def _bp_numpy(llr, e_var, c_ptr, v_edges, v_ptr, max_iter, minsum, ms_scale):
    n = llr.size
    E = e_var.size
    deg = np.diff(c_ptr)
    e_chk = np.repeat(np.arange(deg.size), deg)
    starts = c_ptr[:-1]
    post = llr.copy()
    if _syndrome_ok_np(post, e_var, c_ptr) and np.all(post != 0):
        return post, 0, True
    v2c = llr[e_var].copy()
    c2v = np.zeros(E)
    ok = False
    it = 0
    while it < max_iter:
        it += 1
        is_zero = v2c == 0.0
        is_neg = v2c < 0
        zeros = np.add.reduceat(is_zero.astype(np.int64), starts)[e_chk] - is_zero
        negs = np.add.reduceat(is_neg.astype(np.int64), starts)[e_chk] - is_neg
        sign = np.where(negs & 1, -1.0, 1.0)
        ax = np.abs(v2c)
        if minsum:
            mag_in = np.where(is_zero, np.inf, ax)
            min1 = np.minimum.reduceat(mag_in, starts)
            first = np.full(deg.size, E)
            hit = mag_in == min1[e_chk]
            np.minimum.at(first, e_chk[hit], np.flatnonzero(hit))
            masked = mag_in.copy()
            masked[first[first < E]] = np.inf
            min2 = np.minimum.reduceat(masked, starts)
            mag = np.where(np.arange(E) == first[e_chk], min2[e_chk], min1[e_chk])
            mag = ms_scale * np.where(np.isinf(mag), PHI_CEIL, mag)
        else:
            ph = np.where(is_zero, 0.0, _phi_np(ax))
            S = np.add.reduceat(ph, starts)[e_chk]
            mag = _phi_np(S - ph)
        c2v = np.where(zeros > 0, 0.0, sign * mag)
        # accumulate in ascending edge order per variable, as the loop kernel does
        post = llr.copy()
        np.add.at(post, e_var[v_edges], c2v[v_edges])
        v2c = post[e_var] - c2v
        ok = _syndrome_ok_np(post, e_var, c_ptr) and bool(np.all(post != 0))
        if ok:
            break
    return post, it, ok


def belief_propagation(llr, graph, max_iter: int, minsum: bool = False, ms_scale: float = 0.75, backend=None):
    """Return ``(posterior_llr, iterations, converged)``.

    ``converged`` means every parity check holds and no bit is left at zero
    reliability.
    """
    backend = backend or _accel.backend()
    args = (
        np.ascontiguousarray(llr, dtype=np.float64),
        graph.e_var,
        graph.c_ptr,
        graph.v_edges,
        graph.v_ptr,
        int(max_iter),
        bool(minsum),
        float(ms_scale),
    )
    if backend == "numba":
        post, it, ok = _bp_numba(*args)
    else:
        post, it, ok = _bp_numpy(*args)
    return post, int(it), bool(ok)
