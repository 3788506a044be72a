# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled frame kernels: the hot event loops of the cycle simulator.

Mirrors rsnnsim.accel._kernels.ref exactly — same signatures, same stats
array layout, bit-identical outputs. Accumulators are 32-bit with analytic
guard headroom (worst case |sum| = 40*255*8 < 2**17); a per-pass bound check
replaces the fallback's per-accumulate assert.
"""

from libc.stdint cimport int8_t, int32_t, int64_t, uint8_t

BACKEND_NAME = "compiled"

cdef enum:
    ST_CYCLES0 = 0
    ST_CYCLES1 = 1
    ST_WORDS = 2
    ST_EVENTS = 3
    ST_SKIPPED = 4
    ST_ACC_OPS = 5

cdef int64_t GUARD = 1 << 17


cdef inline void _check_bounds(int32_t[::1] acc) except *:
    cdef Py_ssize_t j
    for j in range(acc.shape[0]):
        if acc[j] >= GUARD or acc[j] <= -GUARD:
            raise AssertionError("guard-bit accumulator exceeded")


def input_pass(const uint8_t[::1] feats, const int8_t[:, ::1] w, bint skip,
               int32_t[::1] acc0, int32_t[::1] acc1, int64_t[::1] stats):
    cdef Py_ssize_t n_in = w.shape[0]
    cdef Py_ssize_t fanout = w.shape[1]
    cdef Py_ssize_t i, j
    cdef int byte, bit
    for i in range(n_in):
        byte = feats[i]
        for bit in range(4):
            if (byte >> bit) & 1:
                stats[ST_CYCLES0] += 1
                stats[ST_WORDS] += 1
                stats[ST_EVENTS] += 1
                stats[ST_ACC_OPS] += fanout
                for j in range(fanout):
                    acc0[j] += (<int32_t> w[i, j]) << bit
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
                for j in range(fanout):
                    acc1[j] += (<int32_t> w[i, j]) << (bit + 4)
            elif not skip:
                stats[ST_CYCLES1] += 1
                stats[ST_WORDS] += 1
                stats[ST_EVENTS] += 1
            else:
                stats[ST_SKIPPED] += 1
    _check_bounds(acc0)
    _check_bounds(acc1)


def recurrent_2ts(const uint8_t[::1] spikes_a, const uint8_t[::1] spikes_b,
                  const int8_t[:, ::1] w,
                  int32_t[::1] acc_a, int32_t[::1] acc_b, int64_t[::1] stats):
    cdef Py_ssize_t rnn = w.shape[0]
    cdef Py_ssize_t fanout = w.shape[1]
    cdef Py_ssize_t i, j
    for i in range(rnn):
        stats[ST_WORDS] += 1
        stats[ST_EVENTS] += 1
        if spikes_a[i]:
            stats[ST_ACC_OPS] += fanout
            for j in range(fanout):
                acc_a[j] += w[i, j]
        if spikes_b[i]:
            stats[ST_ACC_OPS] += fanout
            for j in range(fanout):
                acc_b[j] += w[i, j]
    stats[ST_CYCLES0] += rnn
    stats[ST_CYCLES1] += rnn
    _check_bounds(acc_a)
    _check_bounds(acc_b)


def recurrent_1ts(const uint8_t[::1] spikes, const int8_t[:, ::1] w, bint skip,
                  int32_t[::1] acc, int64_t[::1] stats):
    cdef Py_ssize_t rnn = w.shape[0]
    cdef Py_ssize_t fanout = w.shape[1]
    cdef Py_ssize_t half = rnn // 2
    cdef Py_ssize_t i, j
    cdef int cyc
    for i in range(rnn):
        cyc = ST_CYCLES0 if i < half else ST_CYCLES1
        if spikes[i]:
            stats[cyc] += 1
            stats[ST_WORDS] += 1
            stats[ST_EVENTS] += 1
            stats[ST_ACC_OPS] += fanout
            for j in range(fanout):
                acc[j] += w[i, j]
        elif not skip:
            stats[cyc] += 1
            stats[ST_WORDS] += 1
            stats[ST_EVENTS] += 1
        else:
            stats[ST_SKIPPED] += 1
    _check_bounds(acc)


def fc_pass(const uint8_t[::1] spikes_a, const uint8_t[::1] spikes_b,
            const int8_t[:, ::1] w_words, Py_ssize_t rnn, Py_ssize_t n_groups,
            bint two_ts, bint merge, bint skip,
            int32_t[::1] out, int64_t[::1] stats):
    cdef Py_ssize_t pe = w_words.shape[1]
    cdef Py_ssize_t half = rnn // 2
    cdef Py_ssize_t s0_end, split
    if n_groups % 2 == 0:
        s0_end = n_groups // 2
        split = -1
    else:
        s0_end = (n_groups - 1) // 2
        split = n_groups - 1
    cdef Py_ssize_t g, i, j, lo, hi
    cdef int cyc, merged, shift, stream
    cdef const uint8_t[::1] spikes

    # Set 0 first, then set 1; an odd trailing group is halved across sets.
    for cyc in range(2):
        for g in range(n_groups):
            if split >= 0 and g == split:
                lo = 0 if cyc == 0 else half
                hi = half if cyc == 0 else rnn
            elif (g < s0_end) == (cyc == 0):
                lo = 0
                hi = rnn
            else:
                continue
            if two_ts and merge:
                for i in range(lo, hi):
                    merged = spikes_a[i] + spikes_b[i]
                    if merged:
                        stats[cyc] += 1
                        stats[ST_WORDS] += 1
                        stats[ST_EVENTS] += 1
                        stats[ST_ACC_OPS] += pe
                        shift = 1 if merged == 2 else 0
                        for j in range(pe):
                            out[g * pe + j] += (<int32_t> w_words[g * rnn + i, j]) << shift
                    elif not skip:
                        stats[cyc] += 1
                        stats[ST_WORDS] += 1
                        stats[ST_EVENTS] += 1
                    else:
                        stats[ST_SKIPPED] += 1
            else:
                for stream in range(2 if (two_ts and not merge) else 1):
                    spikes = spikes_a if stream == 0 else spikes_b
                    for i in range(lo, hi):
                        if spikes[i]:
                            stats[cyc] += 1
                            stats[ST_WORDS] += 1
                            stats[ST_EVENTS] += 1
                            stats[ST_ACC_OPS] += pe
                            for j in range(pe):
                                out[g * pe + j] += w_words[g * rnn + i, j]
                        elif not skip:
                            stats[cyc] += 1
                            stats[ST_WORDS] += 1
                            stats[ST_EVENTS] += 1
                        else:
                            stats[ST_SKIPPED] += 1
    _check_bounds(out)
