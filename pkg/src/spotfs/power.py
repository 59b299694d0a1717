"""Unified SNR definition and pilot/data energy split.

Noise variance is fixed to 1 per DD-domain symbol and the signal is scaled:
``E_s = 10**(snr_db/10) * N * M`` is shared between one frame's pilots and
data according to ``E_p / E_d = alpha / (1 - alpha)``.
"""

from __future__ import annotations

import csv
import logging
import math
import os
from dataclasses import dataclass
from typing import TYPE_CHECKING

from .errors import ConfigError

if TYPE_CHECKING:  # pragma: no cover
    from .frame import SchemeId
    from .harness import LinkConfig

logger = logging.getLogger(__name__)

NOISE_VARIANCE = 1.0
ALPHA_GRID = tuple(round(0.1 * i, 1) for i in range(1, 10))


@dataclass(frozen=True)
class PowerAllocation:
    snr_db: float
    E_s: float
    E_p: float
    E_d: float
    alpha: float
    sigma_d2: float
    sigma_p2: float
    N_d: int
    N_p: int
    sigma2: float = NOISE_VARIANCE

    @property
    def pilot_amplitude(self) -> float:
        return math.sqrt(self.sigma_p2)


def allocate(snr_db: float, alpha: float, N_d: int, N_p: int, N: int, M: int) -> PowerAllocation:
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must lie strictly inside (0, 1), got {alpha}")
    if N_d < 1 or N_p < 1:
        raise ConfigError(f"symbol counts must be positive (N_d={N_d}, N_p={N_p})")
    if N < 1 or M < 1:
        raise ConfigError(f"grid dimensions must be positive (N={N}, M={M})")
    E_s = 10.0 ** (snr_db / 10.0) * NOISE_VARIANCE * N * M
    E_p = alpha * E_s
    E_d = E_s - E_p
    return PowerAllocation(
        snr_db=float(snr_db),
        E_s=E_s,
        E_p=E_p,
        E_d=E_d,
        alpha=float(alpha),
        sigma_d2=E_d / N_d,
        sigma_p2=E_p / N_p,
        N_d=int(N_d),
        N_p=int(N_p),
    )


def snr_from_energy(E_s: float, N: int, M: int, sigma2: float = NOISE_VARIANCE) -> float:
    return 10.0 * math.log10(E_s / (sigma2 * N * M))


def alpha_grid_search(cfg: "LinkConfig", scheme: "SchemeId", snr_db: float, trials: int | None = None) -> float:
    """Pick the alpha in 0.1..0.9 minimising uncoded BER at ``snr_db``.

    Every candidate is evaluated on the same ``trials`` frames (common random
    numbers); ties resolve toward the smaller alpha.
    """
    return _grid_search(cfg, scheme, snr_db, trials)[0]


def _grid_search(cfg, scheme, snr_db, trials):
    from .harness import uncoded_ber

    trials = cfg.alpha_trials if trials is None else trials
    if trials < 1:
        raise ConfigError("alpha search needs at least one trial")
    best_alpha, best_ber = ALPHA_GRID[0], math.inf
    for alpha in ALPHA_GRID:
        ber = uncoded_ber(cfg, scheme, snr_db, alpha, trials)
        logger.debug("alpha search %s snr=%.2f alpha=%.1f ber=%.3e", scheme.label, snr_db, alpha, ber)
        if ber < best_ber:
            best_alpha, best_ber = alpha, ber
    return best_alpha, best_ber


def search_key(scheme: "SchemeId", modulation: str) -> str:
    return f"{scheme.label}-{modulation}"


class AlphaCache:
    """CSV-backed memo of alpha search results.

    Rows are ``scheme,snr_db,alpha,uncoded_ber``; the scheme column carries
    the pilot count and modulation (``sp9-qpsk``) so the key is complete.
    """

    HEADER = ("scheme", "snr_db", "alpha", "uncoded_ber")

    def __init__(self, path: str | os.PathLike | None = None):
        self.path = path
        self._rows: dict[tuple[str, str], tuple[float, float]] = {}
        if path is not None and os.path.exists(path):
            with open(path, newline="", encoding="utf-8") as fh:
                for row in csv.DictReader(fh):
                    key = (row["scheme"], _snr_key(float(row["snr_db"])))
                    self._rows[key] = (float(row["alpha"]), float(row["uncoded_ber"]))

    def get(self, key: str, snr_db: float) -> float | None:
        hit = self._rows.get((key, _snr_key(snr_db)))
        return None if hit is None else hit[0]

    def put(self, key: str, snr_db: float, alpha: float, ber: float) -> None:
        self._rows[(key, _snr_key(snr_db))] = (alpha, ber)
        if self.path is not None:
            self._flush()

    def _flush(self) -> None:
        with open(self.path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.HEADER)
            for (scheme, snr), (alpha, ber) in sorted(self._rows.items()):
                w.writerow([scheme, snr, f"{alpha:.1f}", f"{ber:.6e}"])

    def __len__(self) -> int:
        return len(self._rows)


def _snr_key(snr_db: float) -> str:
    return f"{snr_db:.4f}"


def resolve_alpha(cfg: "LinkConfig", scheme: "SchemeId", snr_db: float, cache: AlphaCache | None = None) -> float:
    """Fixed alpha from the config, or a cached/auto-searched one."""
    if cfg.alpha != "auto":
        return float(cfg.alpha)
    key = search_key(scheme, cfg.modulation)
    if cache is not None:
        hit = cache.get(key, snr_db)
        if hit is not None:
            return hit
    alpha, ber = _grid_search(cfg, scheme, snr_db, None)
    if cache is not None:
        cache.put(key, snr_db, alpha, ber)
    return alpha
