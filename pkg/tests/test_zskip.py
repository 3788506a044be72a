import numpy as np
import pytest

from rsnnsim.accel.zskip import (
    ZeroSkipConfig,
    type_a_events,
    type_b_events,
    type_c_events,
    type_d_events,
    validate_mode,
)


def bits_of(byte, width=8):
    return [(byte >> i) & 1 for i in range(width)]


class TestTypeA:
    def test_zero_byte(self):
        low, high = type_a_events(0x00)
        assert low == [] and high == []

    def test_dense_byte(self):
        low, high = type_a_events(0xFF)
        assert [e.shift for e in low] == [0, 1, 2, 3]
        assert [e.shift for e in high] == [4, 5, 6, 7]

    def test_0xa5(self):
        low, high = type_a_events(0xA5)  # 10100101b
        assert [e.shift for e in low] == [0, 2]
        assert [e.shift for e in high] == [5, 7]

    def test_skip_disabled_always_eight_events(self):
        for byte in (0x00, 0x31, 0xFF):
            low, high = type_a_events(byte, skip=False)
            assert len(low) == 4 and len(high) == 4

    def test_exhaustive_reconstruction(self):
        # Oracle: active shift values must rebuild the byte value exactly.
        for byte in range(256):
            low, high = type_a_events(byte)
            assert sum(1 << e.shift for e in low + high) == byte
            lo_off, hi_off = type_a_events(byte, skip=False)
            active = [e.shift for e in lo_off + hi_off if e.active]
            assert sum(1 << s for s in active) == byte


class TestTypeB:
    def test_empty(self):
        assert type_b_events([0] * 8) == []

    def test_edges(self):
        events = type_b_events([1, 0, 0, 0, 0, 0, 0, 1])
        assert [e.index for e in events] == [0, 7]

    def test_dense(self):
        assert len(type_b_events([1] * 8)) == 8

    def test_matches_nonzero_ascending(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            bits = rng.integers(0, 2, size=16)
            got = [e.index for e in type_b_events(bits)]
            assert got == list(np.nonzero(bits)[0])

    def test_skip_disabled_marks_inactive(self):
        events = type_b_events([0, 1, 0], skip=False)
        assert [(e.index, e.active) for e in events] == [(0, False), (1, True), (2, False)]


class TestTypeC:
    def test_both_empty(self):
        assert type_c_events([0] * 8, [0] * 8) == []

    def test_merged_two_shifts_left(self):
        events = type_c_events([0, 1], [0, 1])
        assert events == [(1, 1, 2)]

    def test_mixed_pattern(self):
        a, b = bits_of(0b0110, 4), bits_of(0b0011, 4)
        events = type_c_events(a, b)
        assert [e.index for e in events] == [0, 1, 2]
        assert [e.shift for e in events] == [0, 1, 0]

    def test_exhaustive_or_and_truth_table(self):
        # All 65,536 pairs of 8-bit masks against the OR/AND definitions.
        for a in range(256):
            ab = bits_of(a)
            for b in range(256):
                events = type_c_events(ab, bits_of(b))
                mask = 0
                for e in events:
                    mask |= 1 << e.index
                    assert e.shift == ((a >> e.index) & (b >> e.index) & 1)
                    assert e.value == ((a >> e.index) & 1) + ((b >> e.index) & 1)
                assert mask == (a | b)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            type_c_events([0, 1], [0])


class TestTypeD:
    def test_every_position_costs_a_cycle(self):
        rng = np.random.default_rng(1)
        for density in (0.0, 0.3, 1.0):
            bits = (rng.random(128) < density).astype(np.uint8)
            assert len(type_d_events(bits)) == 128

    def test_zero_spike_accumulates_nothing(self):
        rng = np.random.default_rng(2)
        w = rng.integers(-8, 8, size=(16, 4))
        bits = np.zeros(16, dtype=np.uint8)
        acc = np.zeros(4, dtype=np.int64)
        for e in type_d_events(bits):
            if e.active:
                acc += w[e.index]
        assert not acc.any()

    def test_dense_equals_type_b_without_skipping(self):
        rng = np.random.default_rng(3)
        w = rng.integers(-8, 8, size=(32, 8))
        bits = rng.integers(0, 2, size=32).astype(np.uint8)
        acc_d = np.zeros(8, dtype=np.int64)
        for e in type_d_events(bits):
            if e.active:
                acc_d += w[e.index]
        acc_b = np.zeros(8, dtype=np.int64)
        for e in type_b_events(bits, skip=False):
            if e.active:
                acc_b += w[e.index]
        assert np.array_equal(acc_d, acc_b)


class TestStreamsEqualDenseDot:
    """Any unit's event stream, densely accumulated, equals the dot product."""

    def test_type_a_all_bytes(self):
        rng = np.random.default_rng(4)
        w = rng.integers(-8, 8, size=16)
        for byte in range(256):
            low, high = type_a_events(byte)
            acc = np.zeros(16, dtype=np.int64)
            for e in low + high:
                acc += w.astype(np.int64) << e.shift
            assert np.array_equal(acc, byte * w)

    def test_type_b_random(self):
        rng = np.random.default_rng(5)
        for _ in range(10_000):
            bits = rng.integers(0, 2, size=8)
            w = rng.integers(-8, 8, size=8)
            acc = sum(int(w[e.index]) for e in type_b_events(bits))
            assert acc == int(bits @ w)

    def test_type_c_random_pairs(self):
        rng = np.random.default_rng(6)
        for _ in range(10_000):
            a = rng.integers(0, 2, size=8)
            b = rng.integers(0, 2, size=8)
            w = rng.integers(-8, 8, size=8)
            acc = sum(int(w[e.index]) << e.shift for e in type_c_events(a, b))
            assert acc == int(a @ w) + int(b @ w)


class TestModeLegality:
    def test_legal_assignments(self):
        validate_mode("A", "input", two_ts=True)
        validate_mode("A", "input", two_ts=False)
        validate_mode("B", "recurrent", two_ts=False)
        validate_mode("D", "recurrent", two_ts=True)
        validate_mode("B", "fc", two_ts=False)
        validate_mode("C", "fc", two_ts=True)
        validate_mode("B", "fc", two_ts=True)  # merge disabled

    def test_illegal_assignments(self):
        for mode, kind, two in [
            ("A", "recurrent", True),
            ("B", "recurrent", True),
            ("C", "recurrent", True),
            ("D", "recurrent", False),
            ("C", "fc", False),
            ("D", "input", True),
        ]:
            with pytest.raises(ValueError):
                validate_mode(mode, kind, two)

    def test_config_mode_names(self):
        assert ZeroSkipConfig("A").enabled
        with pytest.raises(ValueError):
            ZeroSkipConfig("E")
