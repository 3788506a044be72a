#!/usr/bin/env python3
"""Benchmark the compiled frame kernels against the pure-Python fallback.

Runs the same seeded fixture through both backends, checks the outputs and
statistics are identical, and reports frames/second for each.

Usage:
  python benchmarks/bench_backends.py [--frames N] [--seeds K] [--ts {1,2}]
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from rsnnsim.accel import SimOptions, get_kernels, load_model, run_utterance_sim
from rsnnsim.model import DEFAULT_LIF, ModelConfig, gen_random_model


def build_fixture(seed, n_frames):
    config = ModelConfig(
        rnn_dim=128,
        input_dim=40,
        fc_dim=1920,
        time_steps=2,
        lif=(DEFAULT_LIF, DEFAULT_LIF),
        weight_scale_shift=(0, 0, 0, 0, 0),
    )
    model = gen_random_model(seed, config, spike_density_hint=0.30)
    frames = np.random.default_rng(seed + 1).integers(
        0, 256, size=(n_frames, 40), dtype=np.uint8
    )
    return model, frames


def bench(kernels, model, frames, options, repeats):
    state = load_model(model, options.time_steps)
    best = float("inf")
    out = stats = None
    for _ in range(repeats):
        start = time.perf_counter()
        out, stats = run_utterance_sim(state, frames, options, kernels=kernels)
        best = min(best, time.perf_counter() - start)
    return out, stats, best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--frames", type=int, default=64)
    parser.add_argument("--seeds", type=int, default=3)
    parser.add_argument("--ts", type=int, default=2, choices=(1, 2))
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    try:
        compiled = get_kernels("compiled")
    except ImportError:
        print("compiled backend not built; run `pip install -e . --no-build-isolation`")
        return 1
    fallback = get_kernels("fallback")
    options = SimOptions(time_steps=args.ts, skip=True, merge=True)

    total = {"compiled": 0.0, "fallback": 0.0}
    n_frames = 0
    for seed in range(args.seeds):
        model, frames = build_fixture(seed, args.frames)
        out_c, stats_c, t_c = bench(compiled, model, frames, options, args.repeats)
        out_f, stats_f, t_f = bench(fallback, model, frames, options, args.repeats)
        assert np.array_equal(out_c, out_f), "backend outputs diverge"
        assert stats_c.to_dict() == stats_f.to_dict(), "backend statistics diverge"
        total["compiled"] += t_c
        total["fallback"] += t_f
        n_frames += len(frames)
        print(
            f"seed {seed}: compiled {len(frames) / t_c:9.1f} fps   "
            f"fallback {len(frames) / t_f:7.1f} fps   "
            f"speedup {t_f / t_c:6.1f}x   (outputs and stats identical)"
        )

    print(
        f"\noverall ({n_frames} frames, ts={args.ts}): "
        f"compiled {n_frames / total['compiled']:.1f} fps, "
        f"fallback {n_frames / total['fallback']:.1f} fps, "
        f"speedup {total['fallback'] / total['compiled']:.1f}x"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
