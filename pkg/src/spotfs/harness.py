"""Monte Carlo link simulation, metrics and configuration.

Frames are simulated in code blocks: a block holds ``F`` frames whose data
capacities together form one LDPC codeword of about ``code_length`` bits.
Every block draws from its own counter-based stream keyed by
``(seed, snr, scheme, block)``, so results do not depend on worker count or
scheduling.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from functools import cached_property

import numpy as np

from .channel import apply_time_domain, sample_channel
from .constellation import MODULATIONS, get_constellation
from .errors import ConfigError
from .estimator import METRICS
from .frame import FrameLayout, SchemeId, build_frame, max_feasible_pilots
from .ldpc import CodeSpec, code_for, encode
from .otfs import demodulate, modulate
from .power import AlphaCache, allocate, resolve_alpha
from .receiver import FrameMeta, IterationPlan, ReceiverOptions, ReceiverTrace, run_receiver

try:  # Python 3.11+
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

logger = logging.getLogger(__name__)

CSV_HEADER = ("scheme", "snr_db", "alpha", "ber", "bler", "nmse", "throughput", "mults_per_frame", "trials")
_ALPHA_STREAM = 0xA1FA


@dataclass(frozen=True)
class LinkConfig:
    N: int = 15
    M: int = 15
    delta_f: float = 15e3
    f_c: float = 4e9
    l_max: int = 4
    k_max: int = 2
    P: int = 4
    modulation: str = "qpsk"
    r_c: float = 0.75
    scheme: SchemeId = SchemeId.sp(9)
    plan: IterationPlan = IterationPlan(0, 4)
    I_MP: int = 15
    I_LDPC: int = 20
    damping: float = 0.6
    mp_tol: float = 1e-6
    snr_grid: tuple[float, ...] = (15.0,)
    alpha: float | str = 0.5
    alpha_trials: int = 200
    alpha_cache: str | None = None
    trials: int = 100
    seed: int = 0
    pcsi: bool = False
    code_length: int = 8100
    minsum: bool = False
    normalize_pmf: bool = True
    detection_metric: str = "coherent"
    workers: int = 1

    def __post_init__(self):
        if isinstance(self.scheme, str):
            object.__setattr__(self, "scheme", SchemeId.parse(self.scheme))
        if isinstance(self.plan, (str, list, tuple)):
            plan = self.plan if isinstance(self.plan, str) else ",".join(str(v) for v in self.plan)
            object.__setattr__(self, "plan", IterationPlan.parse(plan))
        object.__setattr__(self, "snr_grid", tuple(float(s) for s in np.atleast_1d(self.snr_grid)))
        object.__setattr__(self, "modulation", str(self.modulation).lower())
        self.validate()

    @property
    def N_p(self) -> int:
        return self.scheme.n_pilots

    @property
    def NM(self) -> int:
        return self.N * self.M

    def validate(self) -> None:
        if self.N < 1 or self.M < 1:
            raise ConfigError("N and M must be positive")
        if not 0 <= self.l_max < self.M:
            raise ConfigError(f"need 0 <= l_max < M, got l_max={self.l_max}, M={self.M}")
        if not 0 <= 2 * self.k_max < self.N:
            raise ConfigError(f"need 0 <= 2 k_max < N, got k_max={self.k_max}, N={self.N}")
        lattice = (self.l_max + 1) * (2 * self.k_max + 1)
        if not 1 <= self.P <= lattice:
            raise ConfigError(f"P must lie in 1..{lattice}")
        if self.modulation not in MODULATIONS:
            raise ConfigError(f"unknown modulation {self.modulation!r}; expected one of {MODULATIONS}")
        if not 0.0 < self.r_c < 1.0:
            raise ConfigError("r_c must lie in (0, 1)")
        if not self.scheme.is_ep:
            cap = max_feasible_pilots(self.N, self.M, self.l_max, self.k_max)
            if self.N_p > cap:
                raise ConfigError(f"N_p={self.N_p} exceeds max feasible = {cap}")
        if self.alpha != "auto":
            try:
                a = float(self.alpha)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"alpha must be 'auto' or a number, got {self.alpha!r}") from exc
            if not 0.0 < a < 1.0:
                raise ConfigError("alpha must lie strictly inside (0, 1)")
        for name in ("I_MP", "I_LDPC", "trials", "alpha_trials", "code_length", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if not 0.0 < self.damping <= 1.0:
            raise ConfigError("damping must lie in (0, 1]")
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.detection_metric not in METRICS:
            raise ConfigError(f"detection_metric must be one of {METRICS}")
        if not self.snr_grid:
            raise ConfigError("snr_grid is empty")

    def with_(self, **kw) -> "LinkConfig":
        return replace(self, **kw)

    @property
    def effective_plan(self) -> IterationPlan:
        """EP pilot observations are interference-free, so EP runs one pass."""
        return IterationPlan(1, 0) if self.scheme.is_ep else self.plan

    @property
    def options(self) -> ReceiverOptions:
        return ReceiverOptions(
            I_MP=self.I_MP,
            I_LDPC=self.I_LDPC,
            damping=self.damping,
            mp_tol=self.mp_tol,
            pcsi=self.pcsi,
            normalize_pmf=self.normalize_pmf,
            minsum=self.minsum,
            detection_metric=self.detection_metric,
        )

    @cached_property
    def layout(self) -> FrameLayout:
        return FrameLayout.create(self.scheme, self.N, self.M, self.l_max, self.k_max)

    @property
    def bits_per_frame(self) -> int:
        return self.layout.n_data * get_constellation(self.modulation).bits_per_symbol

    @property
    def frames_per_block(self) -> int:
        return max(1, round(self.code_length / self.bits_per_frame))

    @property
    def code(self) -> CodeSpec:
        R_c = self.frames_per_block * self.bits_per_frame
        return code_for(int(round(self.r_c * R_c)), R_c)


_KEYS = {f.name for f in fields(LinkConfig)}
_ALIASES = {"np": "N_p", "n_p": "N_p", "snr": "snr_grid", "i_mp": "I_MP", "i_ldpc": "I_LDPC"}


def config_from_dict(d: dict, base: LinkConfig | None = None) -> LinkConfig:
    """Build a config from a flat (or ``[link]``-sectioned) mapping.

    ``N_p`` / ``np`` sets the pilot count of an ``sp`` scheme.
    """
    flat: dict = {}
    for k, v in d.items():
        if isinstance(v, dict):
            flat.update(v)
        else:
            flat[k] = v
    kw: dict = {}
    n_p = None
    for k, v in flat.items():
        key = _ALIASES.get(k.lower(), k) if k not in _KEYS else k
        if key == "N_p":
            n_p = int(v)
        elif key in _KEYS:
            kw[key] = v
        else:
            raise ConfigError(f"unknown config key {k!r}")
    cfg_base = base or LinkConfig()
    try:
        scheme = kw.pop("scheme", None)
        if scheme is not None and isinstance(scheme, str):
            scheme = SchemeId.parse(scheme)
        scheme = scheme or cfg_base.scheme
        if n_p is not None:
            if scheme.is_ep and n_p != 1:
                raise ConfigError("the embedded-pilot scheme uses exactly one pilot")
            scheme = SchemeId(scheme.kind, n_p)
        return replace(cfg_base, scheme=scheme, **kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | os.PathLike) -> LinkConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(data)


def _snr_key(snr_db: float) -> int:
    return int(round(snr_db * 1000)) + 2**31


def block_rng(seed: int, snr_db: float, scheme: SchemeId, block: int, stream: int = 0) -> np.random.Generator:
    words = [seed, _snr_key(snr_db), zlib.crc32(scheme.label.encode()), block]
    if stream:
        words.append(stream)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))


def transmission_rate(scheme: SchemeId, N: int, M: int, l_max: int, k_max: int, r_c: float, L: int) -> float:
    N_d = N * M - (2 * l_max + 1) * (4 * k_max + 1) if scheme.is_ep else N * M
    return N_d * r_c * math.log2(L) / (N * M)


def effective_throughput(bler: float, N_d: int, r_c: float, L: int, N: int, M: int) -> float:
    return (1.0 - bler) * N_d * r_c * math.log2(L) / (N * M)


def count_multiplications(trace: ReceiverTrace | list[ReceiverTrace]) -> int:
    traces = trace if isinstance(trace, list) else [trace]
    return int(sum(t.total_mults for t in traces))


@dataclass
class BlockOutcome:
    bit_errors: int
    bits: int
    block_error: bool
    erased: bool
    nmse_num: np.ndarray  # (F,) final-iteration ||H_hat - H||^2
    nmse_den: np.ndarray  # (F,)
    nmse_by_r: np.ndarray  # (F, r_end) per-iteration NMSE
    mults: np.ndarray  # (F,)
    traces: list[ReceiverTrace]


def _transmit(cfg: LinkConfig, alloc, bits: np.ndarray, rng: np.random.Generator):
    lay = cfg.layout
    const = get_constellation(cfg.modulation)
    ch = sample_channel(rng, cfg.P, cfg.l_max, cfg.k_max, cfg.N, cfg.M)
    syms = const.scaled(alloc.sigma_d2)[const.bits_to_indices(bits)]
    frame = build_frame(lay, alloc, syms)
    r = apply_time_domain(ch, modulate(frame), rng, alloc.sigma2)
    y = demodulate(r).ravel(order="F")
    return y, FrameMeta(lay, alloc, ch)


def simulate_block(cfg: LinkConfig, snr_db: float, alpha: float, block: int) -> BlockOutcome:
    rng = block_rng(cfg.seed, snr_db, cfg.scheme, block)
    lay = cfg.layout
    alloc = allocate(snr_db, alpha, lay.n_data, lay.n_pilots, cfg.N, cfg.M)
    code = cfg.code
    F = cfg.frames_per_block
    info = rng.integers(0, 2, code.R_b, dtype=np.uint8)
    cw = encode(code, info)
    ys, metas = [], []
    for part in np.split(cw, F):
        y, meta = _transmit(cfg, alloc, part, rng)
        ys.append(y)
        metas.append(meta)
    plan = cfg.effective_plan
    out = run_receiver(ys, metas, cfg.modulation, plan, code, cfg.options)
    errors = int(np.count_nonzero(out.bits_hat != info))
    den = np.array([cfg.NM * float(np.sum(np.abs(m.channel.gains) ** 2)) for m in metas])
    by_r = np.array([[rec.nmse for rec in t.records] for t in out.traces])
    return BlockOutcome(
        bit_errors=errors,
        bits=code.R_b,
        block_error=errors > 0 or out.erased,
        erased=out.erased,
        nmse_num=by_r[:, -1] * den,
        nmse_den=den,
        nmse_by_r=by_r,
        mults=np.array([t.total_mults for t in out.traces], dtype=np.int64),
        traces=out.traces,
    )


@dataclass
class MetricsRecord:
    scheme: str
    snr_db: float
    alpha: float
    bit_errors: int = 0
    bits_total: int = 0
    block_errors: int = 0
    blocks_total: int = 0
    frames: int = 0
    nmse_num_sum: float = 0.0
    nmse_den_sum: float = 0.0
    real_mult_sum: int = 0
    N_d: int = 0
    r_c: float = 0.0
    L: int = 4
    N: int = 15
    M: int = 15
    frame_nmse_num: list = field(default_factory=list, repr=False)
    frame_nmse_den: list = field(default_factory=list, repr=False)
    frame_nmse_by_r: list = field(default_factory=list, repr=False)
    block_bit_errors: list = field(default_factory=list, repr=False)

    def add(self, b: BlockOutcome) -> None:
        self.bit_errors += b.bit_errors
        self.bits_total += b.bits
        self.block_errors += int(b.block_error)
        self.blocks_total += 1
        self.frames += b.nmse_den.size
        self.nmse_num_sum += float(b.nmse_num.sum())
        self.nmse_den_sum += float(b.nmse_den.sum())
        self.real_mult_sum += int(b.mults.sum())
        self.frame_nmse_num.extend(b.nmse_num.tolist())
        self.frame_nmse_den.extend(b.nmse_den.tolist())
        self.frame_nmse_by_r.extend(b.nmse_by_r.tolist())
        self.block_bit_errors.append(b.bit_errors)

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_total if self.bits_total else float("nan")

    @property
    def bler(self) -> float:
        return self.block_errors / self.blocks_total if self.blocks_total else float("nan")

    @property
    def nmse(self) -> float:
        return self.nmse_num_sum / self.nmse_den_sum if self.nmse_den_sum else float("nan")

    @property
    def nmse_se(self) -> float:
        """Delta-method standard error of the ratio-of-sums NMSE over frames."""
        a = np.asarray(self.frame_nmse_num)
        b = np.asarray(self.frame_nmse_den)
        n = a.size
        if n < 2:
            return float("nan")
        R = a.sum() / b.sum()
        return float(np.std(a - R * b, ddof=1) / (np.sqrt(n) * b.mean()))

    def nmse_at(self, r: int) -> float:
        """Ratio-of-sums NMSE of the estimate used at iteration ``r`` (1-based)."""
        by_r = np.asarray(self.frame_nmse_by_r)
        den = np.asarray(self.frame_nmse_den)
        return float((by_r[:, r - 1] * den).sum() / den.sum())

    @property
    def ber_se(self) -> float:
        """Standard error of BER with blocks as the independent unit."""
        e = np.asarray(self.block_bit_errors, dtype=np.float64)
        if e.size < 2 or not self.bits_total:
            return float("nan")
        per = e / (self.bits_total / e.size)
        return float(np.std(per, ddof=1) / np.sqrt(e.size))

    @property
    def throughput(self) -> float:
        return effective_throughput(self.bler, self.N_d, self.r_c, self.L, self.N, self.M)

    @property
    def mults_per_frame(self) -> float:
        return self.real_mult_sum / self.frames if self.frames else 0.0

    def csv_row(self) -> list[str]:
        return [
            self.scheme,
            f"{self.snr_db:g}",
            f"{self.alpha:g}",
            f"{self.ber:.6e}",
            f"{self.bler:.6e}",
            f"{self.nmse:.6e}",
            f"{self.throughput:.6f}",
            f"{round(self.mults_per_frame)}",
            str(self.frames),
        ]


def _block_job(args):
    cfg, snr_db, alpha, block = args
    return simulate_block(cfg, snr_db, alpha, block)


def run_point(
    cfg: LinkConfig,
    snr_db: float,
    alpha: float | None = None,
    cache: AlphaCache | None = None,
    trace_sink=None,
) -> MetricsRecord:
    """Simulate ``cfg.trials`` frames (rounded up to whole code blocks)."""
    if alpha is None:
        alpha = resolve_alpha(cfg, cfg.scheme, snr_db, cache)
    code = cfg.code
    const = get_constellation(cfg.modulation)
    rec = MetricsRecord(
        cfg.scheme.label, float(snr_db), float(alpha), N_d=cfg.layout.n_data, r_c=code.r_c,
        L=const.order, N=cfg.N, M=cfg.M,
    )
    n_blocks = math.ceil(cfg.trials / cfg.frames_per_block)
    jobs = [(cfg, snr_db, alpha, b) for b in range(n_blocks)]
    if cfg.workers > 1 and n_blocks > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = pool.map(_block_job, jobs)
            for b, o in enumerate(outcomes):
                _collect(rec, o, b, trace_sink, cfg)
    else:
        for b, job in enumerate(jobs):
            _collect(rec, _block_job(job), b, trace_sink, cfg)
    return rec


def _collect(rec: MetricsRecord, outcome: BlockOutcome, block: int, trace_sink, cfg: LinkConfig) -> None:
    rec.add(outcome)
    if trace_sink is not None:
        for t in outcome.traces:
            trace_sink.write(t.to_jsonl(scheme=rec.scheme, snr_db=rec.snr_db, block=block) + "\n")


def uncoded_ber(cfg: LinkConfig, scheme: SchemeId, snr_db: float, alpha: float, trials: int) -> float:
    """Hard-decision MP BER after an all-uncoded pass of ``cfg.plan.r_end`` iterations.

    Frame ``t`` uses the same random draws for every ``alpha``.
    """
    c = cfg.with_(scheme=scheme)
    lay = c.layout
    alloc = allocate(snr_db, alpha, lay.n_data, lay.n_pilots, c.N, c.M)
    plan = IterationPlan(1 if scheme.is_ep else c.plan.r_end, 0)
    errors = 0
    for t in range(trials):
        rng = block_rng(c.seed, snr_db, scheme, t, _ALPHA_STREAM)
        bits = rng.integers(0, 2, c.bits_per_frame, dtype=np.uint8)
        y, meta = _transmit(c, alloc, bits, rng)
        out = run_receiver([y], [meta], c.modulation, plan, None, c.options)
        errors += int(np.count_nonzero(out.bits_hat != bits))
    return errors / (trials * c.bits_per_frame)


def run_sweep(cfg: LinkConfig, schemes: list[SchemeId] | None = None, out=None, trace_sink=None) -> str:
    """One CSV row per (scheme, SNR); returns the CSV text and writes it to ``out`` if given."""
    schemes = schemes or [cfg.scheme]
    cache = AlphaCache(cfg.alpha_cache) if cfg.alpha == "auto" else None
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for scheme in schemes:
        c = cfg.with_(scheme=scheme)
        for snr in c.snr_grid:
            rec = run_point(c, snr, cache=cache, trace_sink=trace_sink)
            logger.info("%s snr=%g ber=%.3e bler=%.3e nmse=%.3e", rec.scheme, snr, rec.ber, rec.bler, rec.nmse)
            w.writerow(rec.csv_row())
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text
