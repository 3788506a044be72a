"""Pure-Python frame kernels: the fallback backend.

Event-granular like the hardware: every nonzero bit/spike/merged spike costs
one cycle and one weight-word fetch on its PE set, with the word broadcast
across the 128-wide accumulator row. Semantically identical to the compiled
backend (rsnnsim.accel._cycle); outputs and statistics must match it exactly.

Stats array layout (int64[6]), shared with the compiled kernels:
  0 cycles on PE set 0        3 events processed (cycle-consuming)
  1 cycles on PE set 1        4 events skipped by the zero-skip unit
  2 weight words fetched      5 PE accumulate operations (nonzero x fanout)
"""

from __future__ import annotations

import numpy as np

from ..buffers import fc_group_split

BACKEND_NAME = "fallback"

ST_CYCLES0, ST_CYCLES1, ST_WORDS, ST_EVENTS, ST_SKIPPED, ST_ACC_OPS = range(6)

# Wide-accumulator guard bound; asserted on every accumulate in this backend.
_GUARD = 1 << 17


def _accumulate(acc: np.ndarray, row: np.ndarray, shift: int) -> None:
    acc += row.astype(np.int32) << shift
    assert np.abs(acc).max(initial=0) < _GUARD, "guard-bit accumulator exceeded"


def input_pass(feats, w, skip, acc0, acc1, stats):
    """Bit-serial input-layer pass (zero-skip mode A) feeding both PE sets."""
    n_in, fanout = w.shape
    for i in range(n_in):
        byte = int(feats[i])
        for bit in range(4):
            if (byte >> bit) & 1:
                stats[ST_CYCLES0] += 1
                stats[ST_WORDS] += 1
                stats[ST_EVENTS] += 1
                stats[ST_ACC_OPS] += fanout
                _accumulate(acc0, w[i], bit)
            elif not skip:
                stats[ST_CYCLES0] += 1
                stats[ST_WORDS] += 1
                stats[ST_EVENTS] += 1
            else:
                stats[ST_SKIPPED] += 1
            if (byte >> (bit + 4)) & 1:
                stats[ST_CYCLES1] += 1
                stats[ST_WORDS] += 1
                stats[ST_EVENTS] += 1
                stats[ST_ACC_OPS] += fanout
                _accumulate(acc1, w[i], bit + 4)
            elif not skip:
                stats[ST_CYCLES1] += 1
                stats[ST_WORDS] += 1
                stats[ST_EVENTS] += 1
            else:
                stats[ST_SKIPPED] += 1


def recurrent_2ts(spikes_a, spikes_b, w, acc_a, acc_b, stats):
    """Parallel-time-step pass (mode D): one shared word per position."""
    rnn, fanout = w.shape
    for i in range(rnn):
        stats[ST_WORDS] += 1
        stats[ST_EVENTS] += 1
        if spikes_a[i]:
            stats[ST_ACC_OPS] += fanout
            _accumulate(acc_a, w[i], 0)
        if spikes_b[i]:
            stats[ST_ACC_OPS] += fanout
            _accumulate(acc_b, w[i], 0)
    stats[ST_CYCLES0] += rnn
    stats[ST_CYCLES1] += rnn


def recurrent_1ts(spikes, w, skip, acc, stats):
    """Single-time-step pass (mode B): positions split across the PE sets."""
    rnn, fanout = w.shape
    half = rnn // 2
    for i in range(rnn):
        cyc = ST_CYCLES0 if i < half else ST_CYCLES1
        if spikes[i]:
            stats[cyc] += 1
            stats[ST_WORDS] += 1
            stats[ST_EVENTS] += 1
            stats[ST_ACC_OPS] += fanout
            _accumulate(acc, w[i], 0)
        elif not skip:
            stats[cyc] += 1
            stats[ST_WORDS] += 1
            stats[ST_EVENTS] += 1
        else:
            stats[ST_SKIPPED] += 1


def fc_pass(spikes_a, spikes_b, w_words, rnn, n_groups, two_ts, merge, skip, out, stats):
    """Output-layer pass: mode C when merging two time steps, B otherwise.

    ``w_words`` holds word (g, i) at row g*rnn + i with a 128-wide fanout;
    group halves of an odd trailing group split across the sets.
    """
    s0_groups, s1_groups, split = fc_group_split(n_groups, rnn)
    pe = w_words.shape[1]
    half = rnn // 2
    assignments = [
        (ST_CYCLES0, [(g, 0, rnn) for g in s0_groups]),
        (ST_CYCLES1, [(g, 0, rnn) for g in s1_groups]),
    ]
    if split is not None:
        assignments[0][1].append((split, 0, half))
        assignments[1][1].append((split, half, rnn))

    streams = [spikes_a, spikes_b] if (two_ts and not merge) else [spikes_a]
    for cyc, group_ranges in assignments:
        for g, lo, hi in group_ranges:
            dst = out[g * pe : (g + 1) * pe]
            if two_ts and merge:
                for i in range(lo, hi):
                    merged = int(spikes_a[i]) + int(spikes_b[i])
                    if merged:
                        stats[cyc] += 1
                        stats[ST_WORDS] += 1
                        stats[ST_EVENTS] += 1
                        stats[ST_ACC_OPS] += pe
                        _accumulate(dst, w_words[g * rnn + i], 1 if merged == 2 else 0)
                    elif not skip:
                        stats[cyc] += 1
                        stats[ST_WORDS] += 1
                        stats[ST_EVENTS] += 1
                    else:
                        stats[ST_SKIPPED] += 1
            else:
                for spikes in streams:
                    for i in range(lo, hi):
                        if spikes[i]:
                            stats[cyc] += 1
                            stats[ST_WORDS] += 1
                            stats[ST_EVENTS] += 1
                            stats[ST_ACC_OPS] += pe
                            _accumulate(dst, w_words[g * rnn + i], 0)
                        elif not skip:
                            stats[cyc] += 1
                            stats[ST_WORDS] += 1
                            stats[ST_EVENTS] += 1
                        else:
                            stats[ST_SKIPPED] += 1
