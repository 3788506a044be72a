"""Cycle-level model of the dual-PE-set spiking accelerator."""

from ._kernels import BACKEND, get_kernels
from .buffers import (
    CAPACITY_BYTES,
    CAPACITY_WORDS,
    AccelState,
    CapacityError,
    fc_group_split,
    load_model,
)
from .sim import (
    RunStats,
    SimOptions,
    lif_hw,
    run_frame_sim,
    run_layer_fc,
    run_layer_input,
    run_layer_recurrent,
    run_utterance_sim,
    simulate,
)
from .zskip import (
    ZeroSkipConfig,
    type_a_events,
    type_b_events,
    type_c_events,
    type_d_events,
    validate_mode,
)

__all__ = [
    "BACKEND",
    "CAPACITY_BYTES",
    "CAPACITY_WORDS",
    "AccelState",
    "CapacityError",
    "RunStats",
    "SimOptions",
    "ZeroSkipConfig",
    "fc_group_split",
    "get_kernels",
    "lif_hw",
    "load_model",
    "run_frame_sim",
    "run_layer_fc",
    "run_layer_input",
    "run_layer_recurrent",
    "run_utterance_sim",
    "simulate",
    "type_a_events",
    "type_b_events",
    "type_c_events",
    "type_d_events",
    "validate_mode",
]
