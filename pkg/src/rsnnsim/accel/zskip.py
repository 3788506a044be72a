"""Reconfigurable zero-skipping units.

Four dataflow modes, one per workload:

  A  bit-serial input features: the byte splits into nibbles, low nibble to
     PE set 0 (shift values 0-3), high nibble to set 1 (shifts 4-7); zero
     bits produce no events when skipping is enabled.
  B  single-time-step spikes: nonzero indices emitted in ascending order,
     shift fixed at zero.
  C  two-time-step merged spikes for the output layer: OR of the paired
     streams selects events, AND selects a left shift of 1 (merged value 2)
     versus 0 (value 1).
  D  two-time-step recurrent broadcast: every position costs a cycle whether
     or not it spikes, so both PE sets can share one single-port weight word.

These functions are the reference event semantics; the frame kernels follow
them exactly and the per-cycle debug trace is produced from them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

MODES = ("A", "B", "C", "D")

# (layer kind, uses two time steps) -> legal modes
_LEGAL = {
    ("input", False): ("A",),
    ("input", True): ("A",),
    ("recurrent", False): ("B",),
    ("recurrent", True): ("D",),
    ("fc", False): ("B",),
    ("fc", True): ("B", "C"),
}


@dataclass(frozen=True)
class ZeroSkipConfig:
    mode: str
    enabled: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown zero-skip mode {self.mode!r}")


def validate_mode(mode: str, layer_kind: str, two_ts: bool) -> None:
    """Reject mode/layer pairings the hardware cannot be configured into."""
    legal = _LEGAL.get((layer_kind, two_ts))
    if legal is None:
        raise ValueError(f"unknown layer kind {layer_kind!r}")
    if mode not in legal:
        raise ValueError(
            f"mode {mode} is illegal for a {layer_kind} layer with "
            f"{'two time steps' if two_ts else 'one time step'}"
        )


class BitEvent(NamedTuple):
    shift: int
    active: bool


class SpikeEvent(NamedTuple):
    index: int
    active: bool


class MergedEvent(NamedTuple):
    index: int
    shift: int
    value: int


def type_a_events(byte: int, skip: bool = True) -> tuple[list[BitEvent], list[BitEvent]]:
    """Split a feature byte into the two per-set shift-value streams."""
    if not (0 <= byte <= 255):
        raise ValueError("expected an unsigned byte")
    low, high = [], []
    for bit in range(4):
        if (byte >> bit) & 1:
            low.append(BitEvent(bit, True))
        elif not skip:
            low.append(BitEvent(bit, False))
        if (byte >> (bit + 4)) & 1:
            high.append(BitEvent(bit + 4, True))
        elif not skip:
            high.append(BitEvent(bit + 4, False))
    return low, high


def type_b_events(bits, skip: bool = True) -> list[SpikeEvent]:
    """Nonzero spike indices in ascending order, shift fixed at zero."""
    events = []
    for i, bit in enumerate(bits):
        if bit:
            events.append(SpikeEvent(i, True))
        elif not skip:
            events.append(SpikeEvent(i, False))
    return events


def type_c_events(bits_a, bits_b, skip: bool = True) -> list[MergedEvent]:
    """Merged-spike events: OR gates the event, AND picks the shift."""
    events = []
    for i, (a, b) in enumerate(zip(bits_a, bits_b, strict=True)):
        merged = int(bool(a)) + int(bool(b))
        if merged:
            events.append(MergedEvent(i, 1 if merged == 2 else 0, merged))
        elif not skip:
            events.append(MergedEvent(i, 0, 0))
    return events


def type_d_events(bits) -> list[SpikeEvent]:
    """Broadcast stream: one event per position regardless of its value."""
    return [SpikeEvent(i, bool(bit)) for i, bit in enumerate(bits)]
