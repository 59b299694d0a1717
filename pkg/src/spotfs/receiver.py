"""Iterative channel estimation, detection and decoding.

One receiver run covers a code block, which spans ``F`` consecutive frames
(each with its own channel). Per iteration ``r = 1..r_end`` every frame is
estimated from its current pilot observation, pilot-cancelled and detected;
the data estimate is either the hard MP decision (uncoded iterations) or the
posterior-mean replica built from the decoder's LLRs (coded iterations), and
subtracting it refreshes the pilot observation for the next round.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from .channel import ChannelRealization, DDTaps
from .constellation import Constellation, get_constellation
from .errors import ConfigError
from .estimator import ChannelEstimate, estimate_channel, estimation_mults, threshold_for
from .frame import FrameLayout
from .ldpc import CodeSpec, decode
from .mp import LOGIT_CLIP, mp_detect
from .power import PowerAllocation


@dataclass(frozen=True)
class IterationPlan:
    r_unc: int
    r_cod: int

    def __post_init__(self):
        if self.r_unc < 0 or self.r_cod < 0:
            raise ConfigError("iteration counts must be non-negative")
        if self.r_end < 1:
            raise ConfigError("the plan needs at least one iteration")

    @property
    def r_end(self) -> int:
        return self.r_unc + self.r_cod

    @classmethod
    def parse(cls, text: str) -> "IterationPlan":
        """``"r_unc,r_cod"``."""
        parts = [p.strip() for p in str(text).split(",")]
        if len(parts) != 2:
            raise ConfigError(f"plan must be 'r_unc,r_cod', got {text!r}")
        try:
            return cls(int(parts[0]), int(parts[1]))
        except ValueError as exc:
            raise ConfigError(f"plan must be 'r_unc,r_cod', got {text!r}") from exc

    def mode(self, r: int) -> str:
        return "uncoded" if r <= self.r_unc else "coded"


@dataclass
class IterationRecord:
    r: int
    threshold: float
    P_hat: int
    nmse: float
    mode: str
    decoder_converged: bool | None
    op_counts: dict[str, int]
    terminal: bool = False


@dataclass
class ReceiverTrace:
    """Per-frame iteration log."""

    frame: int
    records: list[IterationRecord] = field(default_factory=list)
    erased: bool = False

    @property
    def total_mults(self) -> int:
        return int(sum(sum(rec.op_counts.values()) for rec in self.records))

    def to_jsonl(self, **extra) -> str:
        lines = []
        for rec in self.records:
            d = {**extra, "frame": self.frame, "erased": self.erased, **asdict(rec)}
            if isinstance(d["nmse"], float) and not np.isfinite(d["nmse"]):
                d["nmse"] = None
            lines.append(json.dumps(d, sort_keys=True))
        return "\n".join(lines)


@dataclass(frozen=True, eq=False)
class FrameMeta:
    layout: FrameLayout
    alloc: PowerAllocation
    channel: ChannelRealization | None = None  # truth, for PCSI and NMSE


@dataclass
class ReceiverOutput:
    bits_hat: np.ndarray
    converged: bool
    traces: list[ReceiverTrace]
    llr_out: np.ndarray
    estimates: list[ChannelEstimate] = field(default_factory=list)

    @property
    def erased(self) -> bool:
        return any(t.erased for t in self.traces)


@dataclass(frozen=True)
class ReceiverOptions:
    I_MP: int = 15
    I_LDPC: int = 20
    damping: float = 0.6
    mp_tol: float = 1e-6
    pcsi: bool = False
    normalize_pmf: bool = True
    minsum: bool = False
    logit_clip: float = LOGIT_CLIP
    detection_metric: str = "coherent"


def _as_taps(H) -> DDTaps | sp.csr_array:
    if isinstance(H, DDTaps):
        return H
    if isinstance(H, (ChannelRealization,)):
        return H.taps
    if isinstance(H, ChannelEstimate):
        raise TypeError("convert the estimate with as_channel(N, M) first")
    return sp.csr_array(H)


def cancel_pilots(y: np.ndarray, H_hat, x_p_vec: np.ndarray) -> np.ndarray:
    """``y - H_hat x_p`` touching only the pilot columns."""
    y = np.asarray(y, dtype=np.complex128)
    H = _as_taps(H_hat)
    nz = np.flatnonzero(x_p_vec)
    out = y.copy()
    if nz.size == 0:
        return out
    if isinstance(H, DDTaps):
        for i in range(H.P):
            d = H.rows[i, nz]
            out[d] -= H.coefs[i, d] * x_p_vec[nz]
        return out
    return out - H[:, nz] @ x_p_vec[nz]


def cancel_data(y: np.ndarray, H_hat, x_d_hat: np.ndarray) -> np.ndarray:
    """``y - H_hat x_d_hat``: the next pilot observation."""
    y = np.asarray(y, dtype=np.complex128)
    H = _as_taps(H_hat)
    if isinstance(H, DDTaps):
        return y - H.apply(x_d_hat)
    return y - H @ np.asarray(x_d_hat)


def _log_sigmoid(t):
    return np.minimum(t, 0.0) - np.log1p(np.exp(-np.abs(t)))


def llrs_to_symbol_logits(
    llr_out: np.ndarray, constellation: str | Constellation, data_positions: np.ndarray, NM: int | None = None
) -> np.ndarray:
    """Per-point log probability ``sum_k log sigmoid(L_k b_jk)``.

    ``b_jk = +1`` for a 0 label bit and ``-1`` for a 1, matching
    ``L = log P(0)/P(1)``. Rows outside ``data_positions`` stay uniform.
    """
    const = get_constellation(constellation) if isinstance(constellation, str) else constellation
    data_positions = np.asarray(data_positions)
    K, L = const.bits_per_symbol, const.order
    NM = int(data_positions.max()) + 1 if NM is None else NM
    llr = np.asarray(llr_out, dtype=np.float64).reshape(-1, K)
    if llr.shape[0] != data_positions.size:
        raise ValueError(f"{llr.shape[0]} symbols of LLRs for {data_positions.size} data positions")
    b = 1.0 - 2.0 * const.bits.astype(np.float64)  # (L, K)
    Z = np.full((NM, L), -K * np.log(2.0))
    Z[data_positions] = _log_sigmoid(llr[:, None, :] * b[None, :, :]).sum(axis=2)
    return Z


def logits_to_pmf(Z: np.ndarray, normalize: bool = True) -> np.ndarray:
    """Elementwise sigmoid, then (by default) per-row renormalisation."""
    P = 0.5 * (1.0 + np.tanh(0.5 * np.asarray(Z, dtype=np.float64)))
    if normalize:
        P = P / P.sum(axis=1, keepdims=True)
    return P


def generate_replicas(pmf: np.ndarray, constellation: str | Constellation, sigma_d2: float) -> np.ndarray:
    const = get_constellation(constellation) if isinstance(constellation, str) else constellation
    return np.asarray(pmf) @ const.scaled(sigma_d2)


def _nmse_paths(est: ChannelEstimate, ch: ChannelRealization | None) -> tuple[float, float]:
    """``||H_hat - H||_F^2`` and ``||H||_F^2`` from the tap lists.

    Distinct taps occupy disjoint cells of ``H`` and every cell of a path has
    modulus ``|h|``, so both norms are ``NM`` times tap-domain sums.
    """
    if ch is None:
        return float("nan"), float("nan")
    NM = ch.NM
    diff: dict[tuple[int, int], complex] = {}
    for h, l, k in ch.paths:
        diff[(l, k)] = diff.get((l, k), 0) - h
    for h, l, k in est.paths:
        diff[(l, k)] = diff.get((l, k), 0) + h
    num = NM * float(sum(abs(v) ** 2 for v in diff.values()))
    den = NM * float(np.sum(np.abs(ch.gains) ** 2))
    return num, den


def run_receiver(
    ys: list[np.ndarray],
    metas: list[FrameMeta],
    modulation: str,
    plan: IterationPlan,
    code: CodeSpec | None,
    options: ReceiverOptions = ReceiverOptions(),
) -> ReceiverOutput:
    """Run the alternating estimation/detection/decoding loop on one code block.

    With ``code=None`` the plan must be fully uncoded; ``bits_hat`` is then
    the concatenated hard MP decisions and no decoder runs.
    """
    const = get_constellation(modulation)
    K = const.bits_per_symbol
    F = len(ys)
    if F != len(metas) or F == 0:
        raise ValueError("need one FrameMeta per received frame")
    cap = [m.layout.n_data * K for m in metas]
    if code is None and plan.r_cod:
        raise ConfigError("coded iterations need a code")
    if code is not None and sum(cap) != code.R_c:
        raise ValueError(f"frames carry {sum(cap)} coded bits but the code expects {code.R_c}")
    splits = np.cumsum(cap)[:-1]
    traces = [ReceiverTrace(f) for f in range(F)]
    ys = [np.asarray(y, dtype=np.complex128).ravel() for y in ys]
    y_pilot = [y.copy() for y in ys]
    last_llr = None
    dec = None

    def _decode(llrs):
        return decode(code, np.concatenate(llrs), options.I_LDPC, minsum=options.minsum, clip=options.logit_clip)

    for r in range(1, plan.r_end + 1):
        mode = plan.mode(r)
        ests, results, final = [], [], []
        for f, meta in enumerate(metas):
            lay, alloc = meta.layout, meta.alloc
            ops: dict[str, int] = {}
            if options.pcsi:
                if meta.channel is None:
                    raise ValueError("PCSI mode needs the true channel in FrameMeta")
                est = ChannelEstimate.from_channel(meta.channel, lay.scheme)
                gamma = 0.0
            else:
                gamma = threshold_for(lay.scheme, r - 1, alloc.sigma2, alloc.sigma_d2, lay.n_pilots)
                Y = y_pilot[f].reshape(lay.M, lay.N, order="F")
                est = estimate_channel(Y, lay, alloc.pilot_amplitude, gamma, options.detection_metric)
                ops["estimation"] = estimation_mults(lay.n_pilots, lay.l_max, lay.k_max, est.P_hat)
            taps = est.as_channel(lay.N, lay.M).taps
            y_d = cancel_pilots(ys[f], taps, lay.pilot_vector(alloc.pilot_amplitude))
            ops["pilot_cancel"] = 2 * est.P_hat * lay.n_pilots
            res = mp_detect(
                y_d, taps, alloc.sigma2, const, alloc.sigma_d2, lay.data_index,
                n_iter=options.I_MP, damping=options.damping, tol=options.mp_tol, logit_clip=options.logit_clip,
            )
            ops["mp"] = res.mults
            if r == 1 and res.degenerate:
                traces[f].erased = True
            num, den = _nmse_paths(est, meta.channel)
            traces[f].records.append(
                IterationRecord(r, float(gamma), est.P_hat, num / den if den else float("nan"), mode, None, ops)
            )
            ests.append(taps)
            results.append(res)
            final.append(est)
        last_llr = [res.beliefs.llr for res in results]
        if mode == "uncoded":
            x_hat = [res.hard_symbols for res in results]
            converged = None
        else:
            dec = _decode(last_llr)
            converged = dec.converged
            x_hat = []
            for f, (meta, part) in enumerate(zip(metas, np.split(dec.llr_out, splits))):
                lay = meta.layout
                n = lay.n_data
                Z = llrs_to_symbol_logits(part, const, lay.data_index, lay.NM)
                pmf = logits_to_pmf(Z, options.normalize_pmf)
                x = np.zeros(lay.NM, dtype=np.complex128)
                x[lay.data_index] = generate_replicas(pmf[lay.data_index], const, meta.alloc.sigma_d2)
                x_hat.append(x)
                ops = traces[f].records[-1].op_counts
                ops["decoder"] = dec.mults // F
                ops["llr_to_logits"] = n * const.order * K
                ops["logits_to_pmf"] = 2 * n * const.order
                ops["replicas"] = 2 * n * const.order
        for f, meta in enumerate(metas):
            y_pilot[f] = cancel_data(ys[f], ests[f], x_hat[f])
            rec = traces[f].records[-1]
            rec.decoder_converged = converged
            rec.op_counts["data_cancel"] = 4 * meta.layout.n_data * ests[f].P
    if code is None:
        hard = [
            const.indices_to_bits(np.argmax(res.beliefs.pmf[m.layout.data_index], axis=1))
            for res, m in zip(results, metas)
        ]
        return ReceiverOutput(np.concatenate(hard).astype(np.uint8), False, traces, np.concatenate(last_llr), final)
    if dec is None:
        # no coded stage ran: one terminal decode on the last MP output
        dec = _decode(last_llr)
        for f in range(F):
            rec = traces[f].records[-1]
            rec.terminal = True
            rec.decoder_converged = dec.converged
            rec.op_counts["decoder"] = dec.mults // F
    return ReceiverOutput(dec.bits_hat, dec.converged, traces, dec.llr_out, final)
