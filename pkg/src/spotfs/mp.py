"""Message-passing detection on the sparse DD factor graph.

Observation node ``d`` couples the ``P_hat`` variables ``cols[:, d]``; the
interference seen by each edge is approximated as Gaussian with the mean and
variance implied by the other variables' current messages. Variable-to-
observation messages are damped PMF updates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _accel
from .channel import DDTaps
from .constellation import Constellation, get_constellation

LOGIT_CLIP = 30.0


@dataclass(eq=False)
class SoftBeliefs:
    pmf: np.ndarray  # (NM, L)
    llr: np.ndarray  # (n_data * K,)
    constellation: str
    logit_clip: float = LOGIT_CLIP

    @property
    def logits(self) -> np.ndarray:
        return pmf_to_logits(self.pmf, self.logit_clip)


@dataclass
class MPResult:
    hard_symbols: np.ndarray  # (NM,) complex, zero off the data set
    beliefs: SoftBeliefs
    iterations: int
    mults: int
    degenerate: bool = False
    extra: dict = field(default_factory=dict)


@_accel.njit
def _mp_kernel_numba(y, cols, rows, coefs, active, pts, sigma2, n_iter, damping, tol):
    P, NM = cols.shape
    L = pts.size
    msg = np.full((P, NM, L), 1.0 / L)
    pmf = np.full((NM, L), 1.0 / L)
    mean = np.zeros((P, NM), dtype=np.complex128)
    var = np.zeros((P, NM))
    mu = np.zeros((P, NM), dtype=np.complex128)
    s2 = np.zeros((P, NM))
    ll = np.zeros((P, NM, L))
    pabs2 = np.abs(pts) ** 2
    tot = np.zeros(L)
    ext = np.zeros(L)
    iters = 0
    for _ in range(n_iter):
        for i in range(P):
            for d in range(NM):
                c = cols[i, d]
                if active[c]:
                    m = 0j
                    e2 = 0.0
                    for a in range(L):
                        m += msg[i, d, a] * pts[a]
                        e2 += msg[i, d, a] * pabs2[a]
                    mean[i, d] = m
                    var[i, d] = max(e2 - (m.real * m.real + m.imag * m.imag), 0.0)
                else:
                    mean[i, d] = 0j
                    var[i, d] = 0.0
        for d in range(NM):
            T = 0j
            V = sigma2
            for i in range(P):
                T += coefs[i, d] * mean[i, d]
                V += (coefs[i, d].real ** 2 + coefs[i, d].imag ** 2) * var[i, d]
            for i in range(P):
                g2 = coefs[i, d].real ** 2 + coefs[i, d].imag ** 2
                mu[i, d] = T - coefs[i, d] * mean[i, d]
                s2[i, d] = max(V - g2 * var[i, d], sigma2)
        for i in range(P):
            for d in range(NM):
                if active[cols[i, d]]:
                    r = y[d] - mu[i, d]
                    for a in range(L):
                        e = r - coefs[i, d] * pts[a]
                        ll[i, d, a] = -(e.real * e.real + e.imag * e.imag) / s2[i, d]
        delta = 0.0
        for c in range(NM):
            if not active[c]:
                continue
            for a in range(L):
                tot[a] = 0.0
            for i in range(P):
                d = rows[i, c]
                for a in range(L):
                    tot[a] += ll[i, d, a]
            for i in range(P):
                d = rows[i, c]
                top = -np.inf
                for a in range(L):
                    ext[a] = tot[a] - ll[i, d, a]
                    if ext[a] > top:
                        top = ext[a]
                z = 0.0
                for a in range(L):
                    ext[a] = np.exp(ext[a] - top)
                    z += ext[a]
                for a in range(L):
                    msg[i, d, a] = damping * ext[a] / z + (1.0 - damping) * msg[i, d, a]
            top = -np.inf
            for a in range(L):
                if tot[a] > top:
                    top = tot[a]
            z = 0.0
            for a in range(L):
                tot[a] = np.exp(tot[a] - top)
                z += tot[a]
            for a in range(L):
                p = tot[a] / z
                dp = abs(p - pmf[c, a])
                if dp > delta:
                    delta = dp
                pmf[c, a] = p
        iters += 1
        if delta < tol:
            break
    return pmf, iters


def _softmax(x, axis=-1):
    x = x - x.max(axis=axis, keepdims=True)
    e = np.exp(x)
    return e / e.sum(axis=axis, keepdims=True)


def _mp_kernel_numpy(y, cols, rows, coefs, active, pts, sigma2, n_iter, damping, tol):
    P, NM = cols.shape
    L = pts.size
    msg = np.full((P, NM, L), 1.0 / L)
    pmf = np.full((NM, L), 1.0 / L)
    edge_active = active[cols]  # (P, NM)
    g2 = np.abs(coefs) ** 2
    pabs2 = np.abs(pts) ** 2
    iters = 0
    for _ in range(n_iter):
        mean = np.where(edge_active, msg @ pts, 0)
        var = np.where(edge_active, np.maximum(msg @ pabs2 - np.abs(mean) ** 2, 0.0), 0.0)
        T = (coefs * mean).sum(axis=0)
        V = sigma2 + (g2 * var).sum(axis=0)
        mu = T[None, :] - coefs * mean
        s2 = np.maximum(V[None, :] - g2 * var, sigma2)
        e = (y[None, :] - mu)[..., None] - coefs[..., None] * pts[None, None, :]
        ll = -(np.abs(e) ** 2) / s2[..., None]
        ll = np.where(edge_active[..., None], ll, 0.0)
        # per variable: gather each path's edge into the variable's frame
        ll_var = ll[np.arange(P)[:, None], rows]  # (P, NM_var, L)
        tot = ll_var.sum(axis=0)  # (NM, L)
        ext = _softmax(tot[None, :, :] - ll_var)  # messages indexed (i, c)
        new_msg = np.empty_like(msg)
        new_msg[np.arange(P)[:, None], rows] = ext
        upd = damping * new_msg + (1.0 - damping) * msg
        msg = np.where(edge_active[..., None], upd, msg)
        new_pmf = _softmax(tot)
        new_pmf[~active] = pmf[~active]
        delta = float(np.abs(new_pmf - pmf).max()) if active.any() else 0.0
        pmf = new_pmf
        iters += 1
        if delta < tol:
            break
    return pmf, iters


def mp_kernel(y, taps: DDTaps, active, pts, sigma2, n_iter, damping, tol, backend: str | None = None):
    backend = backend or _accel.backend()
    args = (
        np.ascontiguousarray(y, dtype=np.complex128),
        np.ascontiguousarray(taps.cols),
        np.ascontiguousarray(taps.rows),
        np.ascontiguousarray(taps.coefs),
        np.ascontiguousarray(active, dtype=np.bool_),
        np.ascontiguousarray(pts, dtype=np.complex128),
        float(sigma2),
        int(n_iter),
        float(damping),
        float(tol),
    )
    if backend == "numba":
        return _mp_kernel_numba(*args)
    return _mp_kernel_numpy(*args)


def mp_mults(iterations: int, P_hat: int, n_active: int, L: int) -> int:
    """Real multiplications per the kernel's loop bodies (see ``_mp_kernel_numba``)."""
    edges = P_hat * n_active
    return iterations * (edges * (14 * L + 9) + 2 * L * n_active)


def mp_detect(
    y_d: np.ndarray,
    taps: DDTaps,
    sigma2: float,
    constellation: str | Constellation,
    symbol_power: float,
    data_index: np.ndarray,
    n_iter: int = 15,
    damping: float = 0.6,
    tol: float = 1e-6,
    logit_clip: float = LOGIT_CLIP,
) -> MPResult:
    """Detect the data symbols in ``y_d`` (pilots already cancelled).

    Only ``data_index`` cells are variable nodes; every other cell is known
    to be zero. With no detected paths the PMFs stay uniform and the result
    is flagged ``degenerate``.
    """
    const = get_constellation(constellation) if isinstance(constellation, str) else constellation
    NM = y_d.size
    L = const.order
    pts = const.scaled(symbol_power)
    active = np.zeros(NM, dtype=bool)
    active[data_index] = True
    if sigma2 <= 0:
        raise ValueError("MP detection needs a positive noise variance")
    if taps.P == 0:
        pmf = np.full((NM, L), 1.0 / L)
        iters, degenerate = 0, True
    else:
        pmf, iters = mp_kernel(y_d, taps, active, pts, sigma2, n_iter, damping, tol)
        degenerate = False
    hard = np.zeros(NM, dtype=np.complex128)
    idx = np.argmax(pmf[data_index], axis=1)
    hard[data_index] = pts[idx]
    llr = beliefs_to_bit_llrs(pmf, const, data_index, logit_clip)
    beliefs = SoftBeliefs(pmf, llr, const.name, logit_clip)
    return MPResult(hard, beliefs, iters, mp_mults(iters, taps.P, data_index.size, L), degenerate)


def pmf_to_logits(pmf: np.ndarray, clip: float = LOGIT_CLIP) -> np.ndarray:
    p = np.asarray(pmf, dtype=np.float64)
    with np.errstate(divide="ignore"):
        z = np.log(p) - np.log1p(-p)
    return np.clip(np.nan_to_num(z, nan=0.0, posinf=clip, neginf=-clip), -clip, clip)


def beliefs_to_bit_llrs(pmf: np.ndarray, constellation, data_index: np.ndarray, clip: float = LOGIT_CLIP) -> np.ndarray:
    """``log P(bit = 0) / P(bit = 1)`` per bit of every data symbol, MSB first."""
    const = get_constellation(constellation) if isinstance(constellation, str) else constellation
    p = np.asarray(pmf)[data_index]
    bits = const.bits.astype(np.float64)
    p1 = p @ bits
    p0 = p @ (1.0 - bits)
    with np.errstate(divide="ignore", invalid="ignore"):
        llr = np.log(p0) - np.log(p1)
    llr = np.nan_to_num(llr, nan=0.0, posinf=clip, neginf=-clip)
    return np.clip(llr, -clip, clip).ravel()
