"""Cycle-level simulator: FSM, LIF hardware, and run statistics.

Executes the fixed stage order per frame — input product, first recurrent
layer, second-layer feedforward plus recurrent, output layer — on two
128-wide PE sets. With two time steps each weight word is fetched once and
shared by both sets; the output layer can additionally merge the two spike
streams so one fetch serves both steps. Outputs are bit-identical to the
golden reference for every option combination; the options only change the
cycle and access statistics.

Cost model: one cycle per event processed by a zero-skip unit, no pipeline
or FSM-transition overhead. Output-drain cycles (4 values per cycle) are
tracked separately from the compute totals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..golden import sat12
from ..model import ACC_MAX, ACC_MIN, LifParams, Model
from . import _kernels
from ._kernels.ref import ST_ACC_OPS, ST_CYCLES0, ST_CYCLES1, ST_EVENTS, ST_SKIPPED, ST_WORDS
from .buffers import AccelState, load_model
from .zskip import (
    type_a_events,
    type_b_events,
    type_c_events,
    type_d_events,
    validate_mode,
)

STAGES = ("l0_input", "l0_recurrent", "l1_feedforward", "l1_recurrent", "fc")


@dataclass(frozen=True)
class SimOptions:
    time_steps: int = 2
    skip: bool = True
    merge: bool = True

    def __post_init__(self):
        if self.time_steps not in (1, 2):
            raise ValueError("time_steps must be 1 or 2")


@dataclass
class LayerStats:
    """Counters for one layer pass; ``cycles`` is the slower set's count.

    Aggregation sums committed per-frame cycles (frames run sequentially, so
    the layer costs max(set0, set1) each frame), while the per-set counters
    keep accumulating for the imbalance report.
    """

    cycles_set0: int = 0
    cycles_set1: int = 0
    cycles: int = 0
    word_reads: int = 0
    events: int = 0
    skipped: int = 0
    acc_ops: int = 0
    element_reads: int = 0
    density: float = 0.0

    def add(self, other: "LayerStats") -> None:
        self.cycles_set0 += other.cycles_set0
        self.cycles_set1 += other.cycles_set1
        self.cycles += other.cycles
        self.word_reads += other.word_reads
        self.events += other.events
        self.skipped += other.skipped
        self.acc_ops += other.acc_ops
        self.element_reads += other.element_reads


@dataclass
class RunStats:
    """Aggregated counters for one or more simulated frames."""

    options: SimOptions
    frames: int = 0
    drain_cycles: int = 0
    layers: dict[str, LayerStats] = field(
        default_factory=lambda: {name: LayerStats() for name in STAGES}
    )
    density_sums: dict[str, float] = field(
        default_factory=lambda: {name: 0.0 for name in STAGES}
    )

    @property
    def cycles_total(self) -> int:
        return sum(ls.cycles for ls in self.layers.values())

    @property
    def word_reads_total(self) -> int:
        return sum(ls.word_reads for ls in self.layers.values())

    @property
    def element_reads_total(self) -> int:
        return sum(ls.element_reads for ls in self.layers.values())

    @property
    def events_total(self) -> int:
        return sum(ls.events for ls in self.layers.values())

    @property
    def skipped_total(self) -> int:
        return sum(ls.skipped for ls in self.layers.values())

    def add(self, other: "RunStats") -> None:
        self.frames += other.frames
        self.drain_cycles += other.drain_cycles
        for name in STAGES:
            self.layers[name].add(other.layers[name])
            self.density_sums[name] += other.density_sums[name]

    def to_dict(self) -> dict:
        n = max(self.frames, 1)
        return {
            "frames": self.frames,
            "options": {
                "time_steps": self.options.time_steps,
                "skip": self.options.skip,
                "merge": self.options.merge,
            },
            "cycles": {
                "total": self.cycles_total,
                "per_layer": {k: v.cycles for k, v in self.layers.items()},
                "per_set": {
                    k: [v.cycles_set0, v.cycles_set1] for k, v in self.layers.items()
                },
            },
            "drain_cycles": self.drain_cycles,
            "weight_reads": {
                "words": self.word_reads_total,
                "elements": self.element_reads_total,
                "per_layer": {
                    k: {"words": v.word_reads, "elements": v.element_reads}
                    for k, v in self.layers.items()
                },
            },
            "events": {
                "processed": self.events_total,
                "skipped": self.skipped_total,
                "acc_ops": sum(v.acc_ops for v in self.layers.values()),
                "per_layer": {
                    k: {"processed": v.events, "skipped": v.skipped, "acc_ops": v.acc_ops}
                    for k, v in self.layers.items()
                },
            },
            "spike_density": {k: self.density_sums[k] / n for k in STAGES},
        }


def _layer_stats(raw: np.ndarray, elements_per_word: int, density: float) -> LayerStats:
    return LayerStats(
        cycles_set0=int(raw[ST_CYCLES0]),
        cycles_set1=int(raw[ST_CYCLES1]),
        cycles=int(max(raw[ST_CYCLES0], raw[ST_CYCLES1])),
        word_reads=int(raw[ST_WORDS]),
        events=int(raw[ST_EVENTS]),
        skipped=int(raw[ST_SKIPPED]),
        acc_ops=int(raw[ST_ACC_OPS]),
        element_reads=int(raw[ST_WORDS]) * elements_per_word,
        density=density,
    )


# ---------------------------------------------------------------------------
# LIF hardware


def lif_hw(
    stimulus: int, membrane_reg: int, spike_reg: int, params: LifParams
) -> tuple[int, int]:
    """One LIF neuron as built: shift, gate, add, compare, reset multiplexer."""
    decayed = membrane_reg >> params.decay_shift
    gated = 0 if spike_reg else decayed
    u = stimulus + gated
    u = ACC_MIN if u < ACC_MIN else (ACC_MAX if u > ACC_MAX else u)
    spike = 1 if u >= params.threshold else 0
    return (0 if spike else u), spike


def _lif_bank_hw(stim, membrane, prev_spike, params: LifParams):
    """Vector form of lif_hw across one PE set's results."""
    gated = np.where(prev_spike != 0, 0, membrane >> params.decay_shift)
    u = sat12(stim.astype(np.int64) + gated)
    spike = (u >= params.threshold).astype(np.uint8)
    membrane_out = np.where(spike != 0, 0, u)
    assert membrane_out.min(initial=0) >= ACC_MIN and membrane_out.max(initial=0) <= ACC_MAX
    return membrane_out, spike


# ---------------------------------------------------------------------------
# FSM stages


def run_layer_input(state: AccelState, frame: np.ndarray, options: SimOptions, kernels=None):
    """Bit-serial input product; result reused by every time step."""
    k = kernels or _kernels.active
    cfg = state.config
    validate_mode("A", "input", options.time_steps == 2)
    feats = np.ascontiguousarray(frame, dtype=np.uint8)
    if feats.shape != (cfg.input_dim,):
        raise ValueError(f"frame shape {feats.shape} does not match input_dim {cfg.input_dim}")
    state.in_buffer[: cfg.input_dim] = feats
    acc0 = np.zeros(cfg.rnn_dim, dtype=np.int32)
    acc1 = np.zeros(cfg.rnn_dim, dtype=np.int32)
    raw = np.zeros(6, dtype=np.int64)
    k.input_pass(feats, state.w_input, options.skip, acc0, acc1, raw)
    state.ff_input = sat12(acc0.astype(np.int64) + acc1).astype(np.int32)
    density = float(np.unpackbits(feats).mean()) if feats.size else 0.0
    return state.ff_input, _layer_stats(raw, cfg.rnn_dim, density)


def _mac_pass(state, weights, sources, options, kernels):
    """Weight-stationary spike MAC over one rnn x rnn matrix.

    ``sources`` holds one spike vector per time step; two-step mode shares
    each weight word across both PE sets, single-step mode splits positions.
    """
    k = kernels or _kernels.active
    rnn = state.config.rnn_dim
    raw = np.zeros(6, dtype=np.int64)
    accs = []
    if len(sources) == 2:
        validate_mode("D", "recurrent", two_ts=True)
        acc_a = np.zeros(rnn, dtype=np.int32)
        acc_b = np.zeros(rnn, dtype=np.int32)
        k.recurrent_2ts(sources[0], sources[1], weights, acc_a, acc_b, raw)
        accs = [acc_a, acc_b]
    else:
        validate_mode("B", "recurrent", two_ts=False)
        acc = np.zeros(rnn, dtype=np.int32)
        k.recurrent_1ts(sources[0], weights, options.skip, acc, raw)
        accs = [acc]
    density = float(sum(int(s.sum()) for s in sources)) / (rnn * len(sources))
    return accs, _layer_stats(raw, rnn, density)


def run_layer_recurrent(state: AccelState, layer_id: str, options: SimOptions, kernels=None):
    """One of the three spike-MAC stages, with LIF where the layer fires."""
    n_ts = options.time_steps
    if layer_id == "l0_recurrent":
        if state.ff_input is None:
            raise RuntimeError("input stage has not run for this frame")
        sources = [np.ascontiguousarray(state.hidden[0, ts]) for ts in range(n_ts)]
        accs, stats = _mac_pass(state, state.w_l0_rec, sources, options, kernels)
        spikes = _lif_stage(state, accs, state.ff_input, state.config.lif[0])
        state.l0_out = spikes
        state.hidden[0, :n_ts] = spikes
        return spikes, stats
    if layer_id == "l1_feedforward":
        if state.l0_out is None:
            raise RuntimeError("first recurrent stage has not run for this frame")
        sources = [np.ascontiguousarray(state.l0_out[ts]) for ts in range(n_ts)]
        accs, stats = _mac_pass(state, state.w_l1_ff, sources, options, kernels)
        # Feedforward register write is a saturation point (12-bit registers).
        state.ff_l1 = np.stack([sat12(a).astype(np.int32) for a in accs])
        return state.ff_l1, stats
    if layer_id == "l1_recurrent":
        if state.ff_l1 is None:
            raise RuntimeError("second-layer feedforward stage has not run for this frame")
        sources = [np.ascontiguousarray(state.hidden[1, ts]) for ts in range(n_ts)]
        accs, stats = _mac_pass(state, state.w_l1_rec, sources, options, kernels)
        spikes = _lif_stage(state, accs, state.ff_l1, state.config.lif[1])
        state.l1_out = spikes
        state.hidden[1, :n_ts] = spikes
        return spikes, stats
    raise ValueError(f"unknown recurrent stage {layer_id!r}")


def _lif_stage(state, accs, ff, params: LifParams) -> np.ndarray:
    """Combine MAC results with feedforward values and run the LIF banks.

    ``ff`` is either one shared vector (input-layer result) or one vector per
    time step. Membranes start at zero each frame; the second step's LIF sees
    the first step's post-reset membrane and spike.
    """
    rnn = state.config.rnn_dim
    membrane = np.zeros(rnn, dtype=np.int64)
    prev_spike = np.zeros(rnn, dtype=np.uint8)
    out = np.zeros((len(accs), rnn), dtype=np.uint8)
    for ts, acc in enumerate(accs):
        ff_ts = ff[ts] if ff.ndim == 2 else ff
        stim = sat12(ff_ts.astype(np.int64) + acc)
        membrane, spike = _lif_bank_hw(stim, membrane, prev_spike, params)
        prev_spike = spike
        out[ts] = spike
    return out


def run_layer_fc(state: AccelState, options: SimOptions, kernels=None):
    """Output layer: merged two-step, per-step, or single-step spike MAC."""
    k = kernels or _kernels.active
    cfg = state.config
    if state.l1_out is None:
        raise RuntimeError("second recurrent stage has not run for this frame")
    rnn = cfg.rnn_dim
    two_ts = options.time_steps == 2
    validate_mode("C" if (options.merge and two_ts) else "B", "fc", two_ts)
    spikes_a = np.ascontiguousarray(state.l1_out[0])
    spikes_b = (
        np.ascontiguousarray(state.l1_out[1])
        if two_ts
        else np.zeros(rnn, dtype=np.uint8)
    )
    out = np.zeros(cfg.fc_dim, dtype=np.int32)
    raw = np.zeros(6, dtype=np.int64)
    k.fc_pass(
        spikes_a,
        spikes_b,
        state.w_fc_words,
        rnn,
        state.n_groups,
        two_ts,
        options.merge and two_ts,
        options.skip,
        out,
        raw,
    )
    logits = sat12(out).astype(np.int16)
    n_ts = 2 if two_ts else 1
    density = float(int(spikes_a.sum()) + int(spikes_b.sum())) / (rnn * n_ts)
    stats = _layer_stats(raw, 128, density)
    drain = -(-cfg.fc_dim // 4)  # 4 values drain per cycle
    return logits, stats, drain


def run_frame_sim(
    state: AccelState,
    frame: np.ndarray,
    options: SimOptions,
    kernels=None,
    collect_events: bool = False,
):
    """Execute the FSM for one frame; returns logits and per-frame stats.

    With ``collect_events`` a per-cycle event log (stage, pe_set, cycle,
    kind, index, shift) is returned as a third element.
    """
    if options.time_steps != state.time_steps:
        raise ValueError("options.time_steps disagrees with the loaded state")
    hidden_before = state.hidden.copy() if collect_events else None
    stats = RunStats(options=options, frames=1)
    _, st = run_layer_input(state, frame, options, kernels)
    stats.layers["l0_input"].add(st)
    stats.density_sums["l0_input"] += st.density
    for stage in ("l0_recurrent", "l1_feedforward", "l1_recurrent"):
        _, st = run_layer_recurrent(state, stage, options, kernels)
        stats.layers[stage].add(st)
        stats.density_sums[stage] += st.density
    logits, st, drain = run_layer_fc(state, options, kernels)
    stats.layers["fc"].add(st)
    stats.density_sums["fc"] += st.density
    stats.drain_cycles += drain
    events = None
    if collect_events:
        events = _event_rows(
            state.config, frame, hidden_before, state.l0_out, state.l1_out, options
        )
    # Frame registers are consumed; drop them so stage order is enforced.
    state.ff_input = None
    state.ff_l1 = None
    state.l0_out = None
    state.l1_out = None
    return (logits, stats, events) if collect_events else (logits, stats)


def run_utterance_sim(
    state: AccelState,
    frames: np.ndarray,
    options: SimOptions,
    kernels=None,
    per_frame: bool = False,
):
    """Run a frame sequence from a zeroed carry; aggregates statistics."""
    state.reset()
    total = RunStats(options=options)
    out = np.zeros((len(frames), state.config.fc_dim), dtype=np.int16)
    frame_stats = []
    for i, frame in enumerate(frames):
        logits, stats = run_frame_sim(state, frame, options, kernels)
        out[i] = logits
        total.add(stats)
        if per_frame:
            frame_stats.append(stats)
    return (out, total, frame_stats) if per_frame else (out, total)


def simulate(model: Model, frames: np.ndarray, options: SimOptions, kernels=None):
    """Load, run one utterance, and return (logits, aggregated stats)."""
    state = load_model(model, options.time_steps)
    return run_utterance_sim(state, frames, options, kernels)


# ---------------------------------------------------------------------------
# Per-cycle debug trace (event log, built from the zero-skip reference units)


def _event_rows(cfg, frame, hidden_before, l0_out, l1_out, options: SimOptions) -> list[tuple]:
    """Event log for one frame: (stage, pe_set, cycle, kind, index, shift)."""
    rnn = cfg.rnn_dim
    rows: list[tuple] = []

    cycles = [0, 0]
    for i in range(cfg.input_dim):
        low, high = type_a_events(int(frame[i]), options.skip)
        for ev in low:
            rows.append(("l0_input", 0, cycles[0], "bit", i, ev.shift))
            cycles[0] += 1
        for ev in high:
            rows.append(("l0_input", 1, cycles[1], "bit", i, ev.shift))
            cycles[1] += 1

    n_ts = options.time_steps
    stage_sources = (
        ("l0_recurrent", [hidden_before[0, ts] for ts in range(n_ts)]),
        ("l1_feedforward", [l0_out[ts] for ts in range(n_ts)]),
        ("l1_recurrent", [hidden_before[1, ts] for ts in range(n_ts)]),
    )
    for stage, src in stage_sources:
        if n_ts == 2:
            for ev in type_d_events(src[0]):
                rows.append((stage, 0, ev.index, "broadcast", ev.index, 0))
                rows.append((stage, 1, ev.index, "broadcast", ev.index, 0))
        else:
            half = rnn // 2
            cycles = [0, 0]
            for ev in type_b_events(src[0], options.skip):
                pe_set = 0 if ev.index < half else 1
                rows.append((stage, pe_set, cycles[pe_set], "spike", ev.index, 0))
                cycles[pe_set] += 1

    from .buffers import fc_group_split

    s0_groups, s1_groups, split = fc_group_split(cfg.fc_dim // 128, rnn)
    half = rnn // 2
    group_ranges = [
        (0, [(g, 0, rnn) for g in s0_groups]),
        (1, [(g, 0, rnn) for g in s1_groups]),
    ]
    if split is not None:
        group_ranges[0][1].append((split, 0, half))
        group_ranges[1][1].append((split, half, rnn))
    two_ts = n_ts == 2
    for pe_set, ranges in group_ranges:
        cycle = 0
        for g, lo, hi in ranges:
            if two_ts and options.merge:
                evs = type_c_events(l1_out[0][lo:hi], l1_out[1][lo:hi], options.skip)
                for ev in evs:
                    rows.append(("fc", pe_set, cycle, "merged", g * rnn + lo + ev.index, ev.shift))
                    cycle += 1
            else:
                for ts in range(n_ts):
                    for ev in type_b_events(l1_out[ts][lo:hi], options.skip):
                        rows.append(("fc", pe_set, cycle, "spike", g * rnn + lo + ev.index, 0))
                        cycle += 1
    return rows
