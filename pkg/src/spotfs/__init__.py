"""Link-level OTFS simulator with embedded and superimposed pilots."""

from ._accel import backend
from .channel import ChannelRealization, DDTaps, apply_time_domain, effective_dd_matrix, sample_channel
from .constellation import Constellation, get_constellation
from .errors import ConfigError, PlacementError, SizeError
from .estimator import ChannelEstimate, detect_paths, estimate_channel, estimate_gains, nmse, threshold_for
from .frame import DDFrame, FrameLayout, PilotKind, SchemeId, build_frame, max_feasible_pilots, place_pilots
from .harness import LinkConfig, MetricsRecord, load_config, run_point, run_sweep, transmission_rate
from .mp import SoftBeliefs, beliefs_to_bit_llrs, mp_detect, pmf_to_logits
from .otfs import TimeSignal, demodulate, modulate
from .power import PowerAllocation, allocate
from .receiver import (
    IterationPlan,
    ReceiverTrace,
    cancel_data,
    cancel_pilots,
    generate_replicas,
    llrs_to_symbol_logits,
    logits_to_pmf,
    run_receiver,
)

__version__ = "0.1.0"

__all__ = [
    "ChannelEstimate",
    "ChannelRealization",
    "ConfigError",
    "Constellation",
    "DDFrame",
    "DDTaps",
    "FrameLayout",
    "IterationPlan",
    "LinkConfig",
    "MetricsRecord",
    "PilotKind",
    "PlacementError",
    "PowerAllocation",
    "ReceiverTrace",
    "SchemeId",
    "SizeError",
    "SoftBeliefs",
    "TimeSignal",
    "allocate",
    "apply_time_domain",
    "backend",
    "beliefs_to_bit_llrs",
    "build_frame",
    "cancel_data",
    "cancel_pilots",
    "demodulate",
    "detect_paths",
    "effective_dd_matrix",
    "estimate_channel",
    "estimate_gains",
    "generate_replicas",
    "get_constellation",
    "llrs_to_symbol_logits",
    "load_config",
    "logits_to_pmf",
    "max_feasible_pilots",
    "modulate",
    "mp_detect",
    "nmse",
    "place_pilots",
    "pmf_to_logits",
    "run_point",
    "run_receiver",
    "run_sweep",
    "sample_channel",
    "threshold_for",
    "transmission_rate",
]
