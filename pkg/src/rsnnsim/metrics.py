"""Analytical complexity, weight-access, size, and sparsity accounting.

Independent of the cycle simulator so the two can cross-check each other:
the simulator counts events as it executes, this module counts them from the
configuration and the activity trace. Per-second figures assume 100 frames/s
(25-ms feature windows at a 10-ms shift).

Counting rule for accumulate operations: the input layer costs 8 per
input-weight pair (bit-serial) and is evaluated once per frame; recurrent and
output layers cost 1 per spike-weight pair per time step. This is the unique
rule consistent with the dense per-frame totals (1,458,176 at width 256 and
two steps; 630,784 / 335,872 at width 128).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .golden import SpikeTrace
from .model import LAYERS, ModelConfig, pruned_param_count

FRAMES_PER_SECOND = 100

RULES = ("dense", "post_skip", "post_merge")
STRATEGIES = ("layer_based", "full_unfolding", "ts_unfolding")


@dataclass
class ComplexityReport:
    rule: str
    time_steps: int
    frames: int
    per_layer: dict[str, int]
    rnn_dim: int
    fc_dim: int

    @property
    def total(self) -> int:
        return sum(self.per_layer.values())

    @property
    def macs_per_frame(self) -> float:
        return self.total / self.frames

    @property
    def macs_per_second(self) -> float:
        return self.macs_per_frame * FRAMES_PER_SECOND

    @property
    def mmacs_per_second(self) -> float:
        return self.macs_per_second / 1e6


def _dense_layer_macs(config: ModelConfig, time_steps: int) -> dict[str, int]:
    r, i, f = config.rnn_dim, config.input_dim, config.fc_dim
    return {
        "l0_input": i * r * 8,
        "l0_recurrent": r * r * time_steps,
        "l1_feedforward": r * r * time_steps,
        "l1_recurrent": r * r * time_steps,
        "fc": r * f * time_steps,
    }


def _consumed_and_produced(trace: SpikeTrace, time_steps: int):
    """Per-layer spike-population counts from a trace.

    Recurrent taps consume the previous frame's spikes (zero at each
    utterance start, marked by a frame index of 0); feedforward taps consume
    the current frame's.
    """
    pops = {
        "input_bits": 0,
        "l0_prev": 0,
        "l0_cur": 0,
        "l1_prev": 0,
        "l1_cur": 0,
        "fc_merged": 0,
    }
    prev = {"l0": None, "l1": None}
    for rec in trace.records:
        if rec.index == 0:
            prev = {"l0": None, "l1": None}
        pops["input_bits"] += int(np.unpackbits(np.asarray(rec.features, dtype=np.uint8)).sum())
        for layer in ("l0", "l1"):
            cur = [rec.spikes[(layer, ts)] for ts in range(1, time_steps + 1)]
            cur_pop = sum(int(s.sum()) for s in cur)
            pops[f"{layer}_cur"] += cur_pop
            if prev[layer] is not None:
                pops[f"{layer}_prev"] += sum(int(s.sum()) for s in prev[layer])
            prev[layer] = cur
        if time_steps == 2:
            merged = rec.spikes[("l1", 1)] | rec.spikes[("l1", 2)]
            pops["fc_merged"] += int(merged.sum())
        else:
            pops["fc_merged"] += int(rec.spikes[("l1", 1)].sum())
    return pops


def count_macs(
    config: ModelConfig,
    time_steps: int,
    rule: str = "dense",
    trace: SpikeTrace | None = None,
) -> ComplexityReport:
    """Accumulate-operation counts under the dense or trace-based rules."""
    if rule not in RULES:
        raise ValueError(f"rule must be one of {RULES}")
    if rule == "dense":
        return ComplexityReport(
            rule, time_steps, 1, _dense_layer_macs(config, time_steps),
            config.rnn_dim, config.fc_dim,
        )
    if trace is None or len(trace) == 0:
        raise ValueError(f"rule {rule!r} needs a non-empty activity trace")
    pops = _consumed_and_produced(trace, time_steps)
    r, f = config.rnn_dim, config.fc_dim
    per_layer = {
        "l0_input": pops["input_bits"] * r,
        "l0_recurrent": pops["l0_prev"] * r,
        "l1_feedforward": pops["l0_cur"] * r,
        "l1_recurrent": pops["l1_prev"] * r,
        "fc": (pops["fc_merged"] if rule == "post_merge" else pops["l1_cur"]) * f,
    }
    return ComplexityReport(rule, time_steps, len(trace), per_layer, r, f)


# ---------------------------------------------------------------------------
# Weight accesses


@dataclass
class AccessReport:
    strategy: str
    time_steps: int
    per_layer: dict[str, int]  # weight elements fetched per frame

    @property
    def elements_per_frame(self) -> int:
        return sum(self.per_layer.values())

    @property
    def elements_per_second(self) -> int:
        return self.elements_per_frame * FRAMES_PER_SECOND

    @property
    def millions(self) -> float:
        # Headline access figures are element counts per frame in millions
        # (1,458,176 reads as 1.458 M/s in the customary notation).
        return self.elements_per_frame / 1e6


def count_weight_accesses(
    config: ModelConfig, time_steps: int, strategy: str = "layer_based"
) -> AccessReport:
    """Weight elements fetched per frame under a dataflow strategy.

    layer_based fetches every recurrent/FC weight once per time step;
    full_unfolding and ts_unfolding share fetches across time steps so each
    weight is fetched once per frame. Input weights are fetched once per
    feature bit under every strategy.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}")
    r, i, f = config.rnn_dim, config.input_dim, config.fc_dim
    per_ts = time_steps if strategy == "layer_based" else 1
    per_layer = {
        "l0_input": i * r * 8,
        "l0_recurrent": r * r * per_ts,
        "l1_feedforward": r * r * per_ts,
        "l1_recurrent": r * r * per_ts,
        "fc": r * f * per_ts,
    }
    return AccessReport(strategy, time_steps, per_layer)


# ---------------------------------------------------------------------------
# Model size


def weight_bytes(params: int, bits: int) -> int:
    """Storage for ``params`` weights at ``bits`` each (exact, in bytes)."""
    total_bits = params * bits
    if total_bits % 8:
        raise ValueError("parameter payload is not byte-aligned")
    return total_bits // 8


@dataclass
class SizeStage:
    label: str
    params: int
    bits: int

    @property
    def bytes(self) -> int:
        return weight_bytes(self.params, self.bits)

    @property
    def megabytes(self) -> float:
        return self.bytes / 1e6


def model_size_report(
    base_config: ModelConfig,
    target_rnn_dim: int = 128,
    fc_sparsity: float = 0.4,
    bits: int = 4,
) -> list[SizeStage]:
    """The four-stage compression size table (float32 baseline downward)."""
    from dataclasses import replace

    pruned_cfg = replace(base_config, rnn_dim=target_rnn_dim)
    base_params = base_config.param_count()
    struct_params = pruned_cfg.param_count()
    unstruct_params = pruned_param_count(pruned_cfg, fc_sparsity)
    return [
        SizeStage("baseline float32", base_params, 32),
        SizeStage("+ structured pruning", struct_params, 32),
        SizeStage("+ unstructured pruning", unstruct_params, 32),
        SizeStage(f"+ {bits}-bit quantization", unstruct_params, bits),
    ]


# ---------------------------------------------------------------------------
# Sparsity


@dataclass
class SparsityReport:
    """Zero fractions per connection tap, averaged over a trace."""

    input_bit_zero_fraction: float
    taps: dict[tuple[str, int, str], float]
    produced: dict[tuple[str, int], float]
    frames: int

    def rows(self) -> list[tuple[str, float]]:
        out = [("input_bits", self.input_bit_zero_fraction)]
        for (layer, ts, kind), frac in sorted(self.taps.items()):
            out.append((f"{layer}.t{ts}.{kind}", frac))
        return out


def sparsity_from_trace(trace: SpikeTrace) -> SparsityReport:
    """Zero fractions of every consumed activation stream in a trace."""
    if len(trace) == 0:
        raise ValueError("trace is empty")
    ts_keys = sorted({ts for rec in trace.records for (_, ts) in rec.spikes})
    bit_total = 0
    bit_nnz = 0
    tap_sums: dict[tuple[str, int, str], list] = {}
    produced_sums: dict[tuple[str, int], list] = {}

    def acc(key, table, frac):
        table.setdefault(key, [0.0, 0])
        table[key][0] += frac
        table[key][1] += 1

    prev: dict[tuple[str, int], np.ndarray | None] = {}
    for rec in trace.records:
        if rec.index == 0:
            prev = {}
        feats = np.asarray(rec.features, dtype=np.uint8)
        bit_total += feats.size * 8
        bit_nnz += int(np.unpackbits(feats).sum())
        for ts in ts_keys:
            l0 = rec.spikes[("l0", ts)]
            l1 = rec.spikes[("l1", ts)]
            acc(("l1", ts, "feedforward"), tap_sums, 1.0 - float(l0.mean()))
            acc(("fc", ts, "feedforward"), tap_sums, 1.0 - float(l1.mean()))
            acc(("l0", ts), produced_sums, 1.0 - float(l0.mean()))
            acc(("l1", ts), produced_sums, 1.0 - float(l1.mean()))
            prev_l0 = prev.get(("l0", ts))
            prev_l1 = prev.get(("l1", ts))
            acc(
                ("l0", ts, "recurrent"),
                tap_sums,
                1.0 if prev_l0 is None else 1.0 - float(prev_l0.mean()),
            )
            acc(
                ("l1", ts, "recurrent"),
                tap_sums,
                1.0 if prev_l1 is None else 1.0 - float(prev_l1.mean()),
            )
            prev[("l0", ts)] = l0
            prev[("l1", ts)] = l1
    taps = {k: v[0] / v[1] for k, v in tap_sums.items()}
    produced = {k: v[0] / v[1] for k, v in produced_sums.items()}
    return SparsityReport(
        input_bit_zero_fraction=1.0 - bit_nnz / bit_total,
        taps=taps,
        produced=produced,
        frames=len(trace),
    )


# ---------------------------------------------------------------------------
# Simulator/analytical cross-check


@dataclass
class CheckResult:
    passed: bool
    diffs: list[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.passed


def cross_check(stats, report: ComplexityReport, config: ModelConfig | None = None) -> CheckResult:
    """Verify simulator counters against the analytical accounting.

    Accumulate operations must match the trace-based MAC counts exactly for
    every layer. When a config is supplied and the run had zero-skipping
    disabled, weight-element reads are also checked against the per-layer
    dense-fetch strategy terms (shared fetches for two-step recurrent layers
    and the merged output layer, per-step fetches otherwise).
    """
    diffs = []
    for layer in LAYERS:
        got = stats.layers[layer].acc_ops
        want = report.per_layer[layer]
        if got != want:
            diffs.append(
                f"{layer}: simulator acc_ops {got} != analytical {want} "
                f"({report.rule})"
            )
            break
    if config is not None and not stats.options.skip and not diffs:
        ts = stats.options.time_steps
        shared = count_weight_accesses(config, ts, "ts_unfolding").per_layer
        per_step = count_weight_accesses(config, ts, "layer_based").per_layer
        frames = max(stats.frames, 1)
        for layer in LAYERS:
            if layer == "fc":
                want = shared["fc"] if (ts == 2 and stats.options.merge) else per_step["fc"]
            else:
                want = shared[layer]
            got = stats.layers[layer].element_reads
            if got != want * frames:
                diffs.append(
                    f"{layer}: simulator element reads {got} != "
                    f"{want} x {frames} frames"
                )
                break
    return CheckResult(passed=not diffs, diffs=diffs)
