"""Threshold-based path detection and pilot-averaged gain estimation.

Shared by the embedded and superimposed pilot schemes; only the threshold
differs. Pilot observations are read with cyclic indexing on both axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .channel import ChannelRealization, dd_coefficient
from .frame import SchemeId


@dataclass(frozen=True, eq=False)
class ChannelEstimate:
    gains: np.ndarray
    delays: np.ndarray
    dopplers: np.ndarray
    threshold_used: float
    scheme: SchemeId | None = None

    @property
    def P_hat(self) -> int:
        return int(self.gains.size)

    @property
    def paths(self) -> list[tuple[complex, int, int]]:
        return [(complex(h), int(l), int(k)) for h, l, k in zip(self.gains, self.delays, self.dopplers)]

    def as_channel(self, N: int, M: int) -> ChannelRealization:
        return ChannelRealization(self.gains, self.delays, self.dopplers, N, M)

    @classmethod
    def from_channel(cls, ch: ChannelRealization, scheme: SchemeId | None = None) -> "ChannelEstimate":
        """Perfect-CSI bypass: the true realization dressed as an estimate."""
        return cls(ch.gains.copy(), ch.delays.copy(), ch.dopplers.copy(), 0.0, scheme)


def tap_lattice(l_max: int, k_max: int) -> tuple[np.ndarray, np.ndarray]:
    l = np.repeat(np.arange(l_max + 1), 2 * k_max + 1)
    k = np.tile(np.arange(-k_max, k_max + 1), l_max + 1)
    return l, k


def _pilot_cells(pilots, l, k, N, M):
    pm = np.array([p[0] for p in pilots])[:, None]
    pn = np.array([p[1] for p in pilots])[:, None]
    return (pm + l[None, :]) % M, (pn + k[None, :]) % N


METRICS = ("magnitude", "coherent")


def detection_metric(Y: np.ndarray, pilots, l_max: int, k_max: int, metric: str = "magnitude") -> np.ndarray:
    """Per-lattice-cell path statistic (lattice order).

    ``magnitude``: ``sum_j |Y[m_pj + l, n_pj + k]|``. ``coherent``: the
    magnitude of the sum of the same cells after removing each pilot's
    path phase, whose noise-only spread is the ``sqrt(N_p)`` that the
    thresholds assume.
    """
    M, N = Y.shape
    l, k = tap_lattice(l_max, k_max)
    rm, rn = _pilot_cells(pilots, l, k, N, M)
    if metric == "magnitude":
        return np.abs(Y[rm, rn]).sum(axis=0)
    if metric == "coherent":
        rot = dd_coefficient(1.0, l[None, :], k[None, :], rm, rn, N, M)
        return np.abs((Y[rm, rn] / rot).sum(axis=0))
    raise ValueError(f"unknown detection metric {metric!r}; expected one of {METRICS}")


def detect_paths(
    Y: np.ndarray, pilots, threshold: float, l_max: int, k_max: int, metric: str = "magnitude"
) -> list[tuple[int, int]]:
    metric = detection_metric(Y, pilots, l_max, k_max, metric)
    l, k = tap_lattice(l_max, k_max)
    hit = metric >= threshold
    return [(int(a), int(b)) for a, b in zip(l[hit], k[hit])]


def estimate_gains(
    Y: np.ndarray, pilots, detected, x_p: complex, threshold: float = float("nan"), scheme: SchemeId | None = None
) -> ChannelEstimate:
    """Average the derotated pilot images over all pilots, then divide by x_p.

    The derotation is the exact DD-domain coefficient of the path at the
    image cell; it reduces to ``z^{k m_p}`` unless ``m_p + l`` wraps past M.
    """
    M, N = Y.shape
    if len(detected) == 0:
        empty = np.zeros(0)
        return ChannelEstimate(empty.astype(np.complex128), empty.astype(np.int64), empty.astype(np.int64), threshold, scheme)
    l = np.array([d[0] for d in detected], dtype=np.int64)
    k = np.array([d[1] for d in detected], dtype=np.int64)
    rm, rn = _pilot_cells(pilots, l, k, N, M)
    rot = dd_coefficient(1.0, l[None, :], k[None, :], rm, rn, N, M)
    gains = (Y[rm, rn] / rot).mean(axis=0) / x_p
    return ChannelEstimate(gains.astype(np.complex128), l, k, threshold, scheme)


def estimate_channel(Y: np.ndarray, layout, x_p: complex, threshold: float, metric: str = "magnitude") -> ChannelEstimate:
    detected = detect_paths(Y, layout.pilot_positions, threshold, layout.l_max, layout.k_max, metric)
    return estimate_gains(Y, layout.pilot_positions, detected, x_p, threshold, layout.scheme)


def estimation_mults(n_pilots: int, l_max: int, k_max: int, P_hat: int) -> int:
    """Real multiplications: |.| per lattice cell and pilot, complex derotation plus real scaling per path and pilot."""
    return 2 * n_pilots * (l_max + 1) * (2 * k_max + 1) + 6 * n_pilots * P_hat


def threshold_for(scheme: SchemeId, r: int, sigma2: float, sigma_d2: float, N_p: int | None = None) -> float:
    """Detection threshold at receiver stage ``r`` (0 = first estimate)."""
    if r < 0:
        raise ValueError("stage index must be non-negative")
    if scheme.is_ep:
        return 3.0 * np.sqrt(sigma2)
    n_p = scheme.n_pilots if N_p is None else N_p
    if r == 0:
        return 3.0 * np.sqrt(n_p * (sigma2 + sigma_d2))
    return 3.0 * np.sqrt(n_p * sigma2)


def nmse(H_hat, H) -> float:
    """``||H_hat - H||_F^2 / ||H||_F^2`` for one realization (NaN if H == 0)."""
    H_hat = sp.csr_array(H_hat) if sp.issparse(H_hat) else np.asarray(H_hat)
    H = sp.csr_array(H) if sp.issparse(H) else np.asarray(H)
    if H_hat.shape != H.shape:
        raise ValueError(f"shape mismatch {H_hat.shape} vs {H.shape}")
    num, den = nmse_terms(H_hat, H)
    return float("nan") if den == 0 else num / den


def nmse_terms(H_hat, H) -> tuple[float, float]:
    diff = H_hat - H
    if sp.issparse(diff):
        num = float(np.sum(np.abs(diff.data) ** 2))
        den = float(np.sum(np.abs(sp.csr_array(H).data) ** 2))
    else:
        num = float(np.sum(np.abs(diff) ** 2))
        den = float(np.sum(np.abs(H) ** 2))
    return num, den
