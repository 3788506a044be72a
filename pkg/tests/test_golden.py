import numpy as np
import pytest

from rsnnsim.golden import (
    GoldenRunner,
    LayerState,
    SpikeTrace,
    fc_forward,
    input_stimulus,
    lif_update,
    recurrent_layer_step,
    spike_stimulus,
)
from rsnnsim.model import LifParams

from conftest import random_frames, random_model, small_config


def clamp12(v):
    return max(-2048, min(2047, v))


def naive_lif(stim, mem, prev_spike, decay_shift, threshold):
    """Scalar oracle written straight from the update rule."""
    u = clamp12(stim + (0 if prev_spike else (mem >> decay_shift)))
    spike = 1 if u >= threshold else 0
    return (0 if spike else u), spike


def naive_run(model, frames, time_steps):
    """Frame oracle: plain loops, wide sums, clamps at register writes."""
    w = [m.tolist() for m in model.int_weights()]
    cfg = model.config
    rnn, fc = cfg.rnn_dim, cfg.fc_dim
    hidden = [[[0] * rnn for _ in range(time_steps)] for _ in range(2)]
    out = []
    for frame in frames:
        ff0 = [
            clamp12(sum(int(frame[i]) * w[0][i][j] for i in range(cfg.input_dim)))
            for j in range(rnn)
        ]
        mem = [[0] * rnn, [0] * rnn]
        prev = [[0] * rnn, [0] * rnn]
        logits_wide = [0] * fc
        for ts in range(time_steps):
            s0 = [0] * rnn
            for j in range(rnn):
                stim = clamp12(ff0[j] + sum(hidden[0][ts][i] * w[1][i][j] for i in range(rnn)))
                mem[0][j], s0[j] = naive_lif(
                    stim, mem[0][j], prev[0][j], cfg.lif[0].decay_shift, cfg.lif[0].threshold
                )
            prev[0] = s0[:]
            ff1 = [clamp12(sum(s0[i] * w[2][i][j] for i in range(rnn))) for j in range(rnn)]
            s1 = [0] * rnn
            for j in range(rnn):
                stim = clamp12(ff1[j] + sum(hidden[1][ts][i] * w[3][i][j] for i in range(rnn)))
                mem[1][j], s1[j] = naive_lif(
                    stim, mem[1][j], prev[1][j], cfg.lif[1].decay_shift, cfg.lif[1].threshold
                )
            prev[1] = s1[:]
            hidden[0][ts] = s0
            hidden[1][ts] = s1
            for k in range(fc):
                logits_wide[k] += sum(s1[i] * w[4][i][k] for i in range(rnn))
        out.append([clamp12(v) for v in logits_wide])
    return np.array(out, dtype=np.int16)


class TestInputStimulus:
    def test_zero_frame(self):
        w = np.arange(12).reshape(3, 4)
        assert not input_stimulus(np.zeros(3, dtype=np.uint8), w).any()

    def test_unit_frame_extracts_row(self):
        rng = np.random.default_rng(0)
        w = rng.integers(-8, 8, size=(5, 7))
        frame = np.zeros(5, dtype=np.uint8)
        frame[3] = 1
        assert np.array_equal(input_stimulus(frame, w), w[3])

    def test_matches_double_loop_with_saturation(self):
        rng = np.random.default_rng(1)
        w = rng.integers(-8, 8, size=(40, 128))
        frame = rng.integers(0, 256, size=40, dtype=np.uint8)
        oracle = [
            clamp12(sum(int(frame[i]) * int(w[i, j]) for i in range(40))) for j in range(128)
        ]
        assert np.array_equal(input_stimulus(frame, w), oracle)

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            input_stimulus(np.zeros(3, dtype=np.uint8), np.zeros((4, 2)))


class TestLifUpdate:
    def test_fires_at_threshold_and_resets(self):
        params = LifParams(decay_shift=1, threshold=16)
        membrane, spike = lif_update(16, 0, 0, params)
        assert (membrane, spike) == (0, 1)

    def test_decay_by_half(self):
        params = LifParams(decay_shift=1, threshold=16)
        membrane, spike = lif_update(0, 8, 0, params)
        assert (membrane, spike) == (4, 0)

    def test_previous_spike_gates_membrane(self):
        params = LifParams(decay_shift=0, threshold=2048)
        for mem in (-2048, -5, 100, 2047):
            membrane, spike = lif_update(7, mem, 1, params)
            assert (membrane, spike) == (7, 0)

    def test_saturates_both_ends(self):
        params = LifParams(decay_shift=0, threshold=2048)
        assert lif_update(2047, 2000, 0, params)[0] == 2047
        assert lif_update(-2048, -2000, 0, params)[0] == -2048


class TestRecurrentLayerStep:
    def test_zero_hidden_thresholds_feedforward(self):
        params = LifParams(decay_shift=0, threshold=4)
        ff = np.array([3, 4, -1, 9], dtype=np.int64)
        state = LayerState.zeros(4)
        spikes = recurrent_layer_step(ff, np.zeros(4, dtype=np.uint8), np.zeros((4, 4)), state, params)
        assert np.array_equal(spikes, [0, 1, 0, 1])

    def test_subthreshold_integration(self):
        params = LifParams(decay_shift=1, threshold=2048)
        ff = np.full(2, 100, dtype=np.int64)
        state = LayerState.zeros(2)
        w = np.zeros((2, 2))
        recurrent_layer_step(ff, np.zeros(2, dtype=np.uint8), w, state, params)
        assert np.array_equal(state.membrane, [100, 100])
        recurrent_layer_step(ff, np.zeros(2, dtype=np.uint8), w, state, params)
        # second step: 100 + (100 >> 1) = 150, still no spikes
        assert np.array_equal(state.membrane, [150, 150])

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(2)
        params = LifParams(decay_shift=2, threshold=8)
        w = rng.integers(-8, 8, size=(128, 128))
        hidden = rng.integers(0, 2, size=128).astype(np.uint8)
        ff = rng.integers(-2048, 2048, size=128)
        state = LayerState.zeros(128)
        spikes = recurrent_layer_step(ff, hidden, w, state, params)
        for j in range(128):
            stim = clamp12(int(ff[j]) + sum(int(hidden[i]) * int(w[i, j]) for i in range(128)))
            _, want = naive_lif(stim, 0, 0, 2, 8)
            assert spikes[j] == want


class TestFcForward:
    def test_zero_spikes(self):
        assert not fc_forward([np.zeros(4, dtype=np.uint8)], np.ones((4, 8))).any()

    def test_identical_steps_double_the_row(self):
        rng = np.random.default_rng(3)
        w = rng.integers(-8, 8, size=(16, 32))
        e = np.zeros(16, dtype=np.uint8)
        e[5] = 1
        got = fc_forward([e, e], w)
        assert np.array_equal(got, np.clip(2 * w[5], -2048, 2047))

    def test_matches_brute_force(self):
        rng = np.random.default_rng(4)
        w = rng.integers(-8, 8, size=(128, 256))
        s1 = rng.integers(0, 2, size=128).astype(np.uint8)
        s2 = rng.integers(0, 2, size=128).astype(np.uint8)
        got = fc_forward([s1, s2], w)
        for k in range(256):
            want = clamp12(
                sum(int(s1[i]) * int(w[i, k]) for i in range(128))
                + sum(int(s2[i]) * int(w[i, k]) for i in range(128))
            )
            assert got[k] == want


class TestRunFrame:
    def test_all_zero_start(self):
        model = random_model(1)
        runner = GoldenRunner(model)
        logits, _, _ = runner.run_frame(
            np.zeros(model.config.input_dim, dtype=np.uint8), runner.zero_carry()
        )
        assert not logits.any()

    def test_silent_network_with_max_threshold(self):
        for ts in (1, 2):
            model = random_model(2, thresholds=(2048, 2048))
            runner = GoldenRunner(model, ts)
            logits, _ = runner.run_utterance(random_frames(5, 4, model.config.input_dim))
            assert not logits.any()

    def test_deterministic(self):
        model = random_model(3)
        frames = random_frames(6, 5, model.config.input_dim)
        a, _ = GoldenRunner(model).run_utterance(frames)
        b, _ = GoldenRunner(model).run_utterance(frames)
        assert np.array_equal(a, b)

    def test_matches_naive_oracle_with_carry(self):
        for seed in range(4):
            model = random_model(seed, small_config(rnn=10, inp=6, fc=12), thresholds=(4, 2))
            frames = random_frames(seed + 10, 3, 6)
            for ts in (1, 2):
                got, _ = GoldenRunner(model, ts).run_utterance(frames)
                assert np.array_equal(got, naive_run(model, frames, ts))

    def test_spike_vectors_are_binary_and_recorded(self):
        model = random_model(4)
        frames = random_frames(7, 2, model.config.input_dim)
        _, trace = GoldenRunner(model).run_utterance(frames)
        assert len(trace) == 2
        for rec in trace.records:
            assert set(rec.spikes) == {("l0", 1), ("l0", 2), ("l1", 1), ("l1", 2)}
            for bits in rec.spikes.values():
                assert set(np.unique(bits)).issubset({0, 1})


class TestSpikeTrace:
    def test_line_round_trip(self):
        model = random_model(5)
        frames = random_frames(8, 3, model.config.input_dim)
        _, trace = GoldenRunner(model).run_utterance(frames)
        clone = SpikeTrace.from_lines(trace.to_lines(), model.config.rnn_dim)
        assert len(clone) == len(trace)
        for a, b in zip(trace.records, clone.records):
            assert np.array_equal(a.features, b.features)
            assert set(a.spikes) == set(b.spikes)
            for key in a.spikes:
                assert np.array_equal(a.spikes[key], b.spikes[key])

    def test_file_round_trip(self, tmp_path):
        model = random_model(6)
        frames = random_frames(9, 2, model.config.input_dim)
        _, trace = GoldenRunner(model).run_utterance(frames)
        path = tmp_path / "trace.txt"
        trace.save(path)
        clone = SpikeTrace.load(path, model.config.rnn_dim)
        assert clone.to_lines() == trace.to_lines()


class TestProperties:
    def test_merged_identity_under_saturation(self):
        # Doubling a row equals adding it at both steps, even when clamped.
        rng = np.random.default_rng(10)
        for _ in range(50):
            w = rng.integers(-8, 8, size=(128, 8))
            s = rng.integers(0, 2, size=128).astype(np.uint8)
            assert np.array_equal(fc_forward([s, s], w), np.clip(2 * (s @ w), -2048, 2047))

    def test_spike_saturation_regime(self):
        # threshold 1, no decay, positive stimulus: a neuron fires each step.
        params = LifParams(decay_shift=0, threshold=1)
        mem, spike = 0, 0
        for _ in range(5):
            mem, spike = lif_update(1, mem, spike, params)
            assert spike == 1 and mem == 0

    def test_observables_always_in_range(self):
        model = random_model(11)
        runner = GoldenRunner(model)
        frames = random_frames(12, 8, model.config.input_dim)
        logits, _ = runner.run_utterance(frames)
        assert logits.min() >= -2048 and logits.max() <= 2047

    def test_spike_stimulus_matches_input_route(self):
        # A frame of zeros and ones drives both product paths identically.
        rng = np.random.default_rng(13)
        w = rng.integers(-8, 8, size=(24, 16))
        bits = rng.integers(0, 2, size=24).astype(np.uint8)
        assert np.array_equal(spike_stimulus(bits, w), input_stimulus(bits, w))

    def test_pure_function_of_inputs(self):
        model = random_model(14)
        frames = random_frames(15, 4, model.config.input_dim)
        runner = GoldenRunner(model)
        a, ta = runner.run_utterance(frames)
        b, tb = runner.run_utterance(frames)
        assert np.array_equal(a, b) and ta.to_lines() == tb.to_lines()
