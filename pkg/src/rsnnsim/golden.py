"""Fixed-point reference implementation of the spiking-network inference.

Layer-by-layer, time-step-by-time-step evaluation with no hardware dataflow
structure; the cycle-level simulator must match it bit for bit. All dot
products accumulate exactly in wide integers and are saturated to the 12-bit
accumulator domain at the points where hardware writes a register: the
feedforward result, the LIF stimulus, the membrane update, and the output
logits. Membrane potentials reset at the start of every frame; hidden spikes
carry across frames per time step and reset at utterance boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ACC_MAX, ACC_MIN, LifParams, Model

# Wide-accumulator guard: |any partial sum| stays below 2**17 by construction
# (40 inputs x 255 x 8 = 81,600 worst case in the input layer).
GUARD = 1 << 17


def sat12(x):
    """Saturate to the 12-bit signed accumulator domain."""
    return np.clip(x, ACC_MIN, ACC_MAX)


def _sat12_int(value: int) -> int:
    return ACC_MIN if value < ACC_MIN else (ACC_MAX if value > ACC_MAX else value)


def lif_update(
    stimulus: int, prev_membrane: int, prev_spike: int, params: LifParams
) -> tuple[int, int]:
    """One leaky integrate-and-fire step for a single neuron.

    The decayed previous membrane (arithmetic right shift) is gated off when
    the neuron spiked at the previous time step; the sum saturates, fires on
    >= threshold, and the returned membrane is hard-reset to zero on a spike.
    """
    decayed = 0 if prev_spike else (prev_membrane >> params.decay_shift)
    u = _sat12_int(stimulus + decayed)
    spike = 1 if u >= params.threshold else 0
    return (0 if spike else u), spike


def _lif_bank(stim, membrane, prev_spike, params: LifParams):
    """Vector form of lif_update over a whole layer."""
    decayed = np.where(prev_spike != 0, 0, membrane >> params.decay_shift)
    u = sat12(stim + decayed)
    spike = (u >= params.threshold).astype(np.uint8)
    return np.where(spike != 0, 0, u), spike


def input_stimulus(frame: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Saturated feature-times-weight product, computed once per frame."""
    feats = np.asarray(frame, dtype=np.int64)
    w = np.asarray(weights, dtype=np.int64)
    if feats.shape != (w.shape[0],):
        raise ValueError(f"frame length {feats.shape} does not match weights {w.shape}")
    if feats.size and (feats.min() < 0 or feats.max() > 255):
        raise ValueError("features must be unsigned bytes")
    wide = feats @ w
    assert np.abs(wide).max(initial=0) < GUARD
    return sat12(wide)


def spike_stimulus(spikes: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Saturated spike-times-weight product (feedforward into a layer)."""
    s = np.asarray(spikes, dtype=np.int64)
    w = np.asarray(weights, dtype=np.int64)
    if s.shape != (w.shape[0],):
        raise ValueError(f"spike length {s.shape} does not match weights {w.shape}")
    wide = s @ w
    assert np.abs(wide).max(initial=0) < GUARD
    return sat12(wide)


@dataclass
class LayerState:
    """Within-frame membrane and previous-step spikes for one layer."""

    membrane: np.ndarray
    prev_spike: np.ndarray

    @classmethod
    def zeros(cls, dim: int) -> "LayerState":
        return cls(np.zeros(dim, dtype=np.int64), np.zeros(dim, dtype=np.uint8))


def recurrent_layer_step(
    ff_stimulus: np.ndarray,
    prev_hidden: np.ndarray,
    weights: np.ndarray,
    state: LayerState,
    params: LifParams,
) -> np.ndarray:
    """One time step of a recurrent layer; mutates the membrane state."""
    stim = sat12(ff_stimulus + np.asarray(prev_hidden, dtype=np.int64) @ np.asarray(weights, dtype=np.int64))
    state.membrane, spike = _lif_bank(stim, state.membrane, state.prev_spike, params)
    state.prev_spike = spike
    assert state.membrane.min(initial=0) >= ACC_MIN and state.membrane.max(initial=0) <= ACC_MAX
    return spike


def fc_forward(spikes_per_ts: list[np.ndarray], weights: np.ndarray) -> np.ndarray:
    """Output logits: spike-weight products summed over time steps, then saturated."""
    if not (1 <= len(spikes_per_ts) <= 2):
        raise ValueError("expected one or two spike vectors")
    w = np.asarray(weights, dtype=np.int64)
    wide = np.zeros(w.shape[1], dtype=np.int64)
    for spikes in spikes_per_ts:
        s = np.asarray(spikes, dtype=np.int64)
        if s.shape != (w.shape[0],):
            raise ValueError("spike vector does not match the FC weight rows")
        wide += s @ w
    assert np.abs(wide).max(initial=0) < GUARD
    return sat12(wide)


# ---------------------------------------------------------------------------
# Frame/utterance execution


@dataclass
class Carry:
    """Hidden spikes carried across frames: (layer, time step, neuron)."""

    hidden: np.ndarray

    @classmethod
    def zeros(cls, rnn_dim: int, time_steps: int) -> "Carry":
        return cls(np.zeros((2, time_steps, rnn_dim), dtype=np.uint8))


@dataclass
class FrameRecord:
    """Trace of one frame: input bytes plus every spike vector produced."""

    index: int
    features: np.ndarray
    spikes: dict[tuple[str, int], np.ndarray]


@dataclass
class SpikeTrace:
    """Line-oriented activity trace consumed by the accounting module.

    Text form, one record per line: ``<frame> <tag> <ts> <hex>`` where tag is
    ``in`` (feature bytes) or ``l0``/``l1`` (spike vectors, packed LSB-first
    per byte before hex encoding).
    """

    records: list[FrameRecord] = field(default_factory=list)

    def add(self, record: FrameRecord) -> None:
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def to_lines(self) -> list[str]:
        lines = []
        for rec in self.records:
            lines.append(f"{rec.index} in 0 {bytes(rec.features.tobytes()).hex()}")
            for (layer, ts), bits in sorted(rec.spikes.items()):
                packed = np.packbits(bits, bitorder="little").tobytes()
                lines.append(f"{rec.index} {layer} {ts} {packed.hex()}")
        return lines

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("\n".join(self.to_lines()) + "\n")

    @classmethod
    def from_lines(cls, lines, rnn_dim: int) -> "SpikeTrace":
        trace = cls()
        current: FrameRecord | None = None
        for line in lines:
            line = line.strip()
            if not line:
                continue
            idx_s, tag, ts_s, hexdata = line.split()
            idx, ts = int(idx_s), int(ts_s)
            if current is None or current.index != idx:
                current = FrameRecord(idx, np.zeros(0, dtype=np.uint8), {})
                trace.add(current)
            raw = bytes.fromhex(hexdata)
            if tag == "in":
                current.features = np.frombuffer(raw, dtype=np.uint8).copy()
            else:
                bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")
                current.spikes[(tag, ts)] = bits[:rnn_dim].copy()
        return trace

    @classmethod
    def load(cls, path, rnn_dim: int) -> "SpikeTrace":
        with open(path) as fh:
            return cls.from_lines(fh, rnn_dim)


class GoldenRunner:
    """Unpacks a model once and evaluates frames against it."""

    def __init__(self, model: Model, time_steps: int | None = None):
        self.config = model.config
        self.time_steps = time_steps or model.config.time_steps
        if self.time_steps not in (1, 2):
            raise ValueError("time_steps must be 1 or 2")
        w = model.int_weights()
        self.w_input = w[0].astype(np.int64)
        self.w_l0_rec = w[1].astype(np.int64)
        self.w_l1_ff = w[2].astype(np.int64)
        self.w_l1_rec = w[3].astype(np.int64)
        self.w_fc = w[4].astype(np.int64)

    def zero_carry(self) -> Carry:
        return Carry.zeros(self.config.rnn_dim, self.time_steps)

    def run_frame(
        self, frame: np.ndarray, carry: Carry, frame_index: int = 0
    ) -> tuple[np.ndarray, Carry, FrameRecord]:
        """Evaluate one frame; returns (logits, next carry, trace record)."""
        cfg = self.config
        if carry.hidden.shape != (2, self.time_steps, cfg.rnn_dim):
            raise ValueError("carry shape does not match the model")
        ff0 = input_stimulus(frame, self.w_input)
        states = (LayerState.zeros(cfg.rnn_dim), LayerState.zeros(cfg.rnn_dim))
        new_hidden = np.zeros_like(carry.hidden)
        l1_spikes = []
        record = FrameRecord(frame_index, np.asarray(frame, dtype=np.uint8).copy(), {})
        for ts in range(self.time_steps):
            s0 = recurrent_layer_step(
                ff0, carry.hidden[0, ts], self.w_l0_rec, states[0], cfg.lif[0]
            )
            ff1 = spike_stimulus(s0, self.w_l1_ff)
            s1 = recurrent_layer_step(
                ff1, carry.hidden[1, ts], self.w_l1_rec, states[1], cfg.lif[1]
            )
            new_hidden[0, ts] = s0
            new_hidden[1, ts] = s1
            record.spikes[("l0", ts + 1)] = s0.copy()
            record.spikes[("l1", ts + 1)] = s1.copy()
            l1_spikes.append(s1)
        logits = fc_forward(l1_spikes, self.w_fc).astype(np.int16)
        return logits, Carry(new_hidden), record

    def run_utterance(
        self, frames: np.ndarray, collect_trace: bool = True
    ) -> tuple[np.ndarray, SpikeTrace]:
        """Evaluate a frame sequence with zeroed initial carry."""
        carry = self.zero_carry()
        out = np.zeros((len(frames), self.config.fc_dim), dtype=np.int16)
        trace = SpikeTrace()
        for i, frame in enumerate(frames):
            logits, carry, record = self.run_frame(frame, carry, i)
            out[i] = logits
            if collect_trace:
                trace.add(record)
        return out, trace


def run_utterance(model: Model, frames: np.ndarray, time_steps: int | None = None):
    """Convenience wrapper: run one utterance and return (logits, trace)."""
    return GoldenRunner(model, time_steps).run_utterance(frames)
