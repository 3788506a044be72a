"""Command-line front end.

Subcommands: gen (random model fixture), gen-features (feature-file
fixture), compress (pruning + quantization pipeline with the size table),
run (reference and/or simulator execution), compare (bytewise logit
comparison), report (complexity / access / size / sparsity tables).

Exit codes: 0 success, 1 comparison mismatch, 2 usage error, 3 I/O or
format error.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import formats, golden, metrics
from .accel import BACKEND, SimOptions
from .model import (
    DEFAULT_LIF,
    CalibrationError,
    Model,
    ModelConfig,
    QuantizedMatrix,
    build_baseline_config,
    gen_random_model,
    prune_structured,
    prune_unstructured,
    pruned_param_count,
    quantize_values,
)

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_USAGE = 2
EXIT_IO = 3


@dataclass(frozen=True)
class RunManifest:
    """Everything a run depends on; echoed to disk for reproducibility."""

    model_path: str
    feature_path: str
    time_steps: int
    skip: bool
    merge: bool
    engine: str
    utt_len: int | None
    jobs: int
    cycle_trace: bool
    out_dir: str


def _table(rows: list[tuple], header: tuple | None = None) -> str:
    data = ([header] if header else []) + [tuple(str(c) for c in r) for r in rows]
    widths = [max(len(r[i]) for r in data) for i in range(len(data[0]))]
    lines = []
    for r in data:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
    if header:
        lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _make_config(args, time_steps=None) -> ModelConfig:
    return ModelConfig(
        rnn_dim=args.dim,
        input_dim=args.input_dim,
        fc_dim=args.fc_dim,
        time_steps=time_steps or getattr(args, "ts", 2),
        lif=(DEFAULT_LIF, DEFAULT_LIF),
        weight_scale_shift=(0, 0, 0, 0, 0),
    )


# ---------------------------------------------------------------------------
# gen / gen-features


def cmd_gen(args) -> int:
    config = _make_config(args)
    model = gen_random_model(
        args.seed, config, spike_density_hint=args.density, fc_sparsity=args.fc_sparsity
    )
    n_bytes = formats.save_model(args.out, model)
    params = pruned_param_count(config, args.fc_sparsity)
    print(f"wrote {args.out}: {params} parameters, {n_bytes} bytes")
    return EXIT_OK


FEATURE_MODES = ("uniform", "dense", "zeros", "byte-bernoulli", "bit-bernoulli")


def gen_feature_frames(
    seed: int, n_frames: int, input_dim: int, mode: str = "uniform", density: float = 0.5
) -> np.ndarray:
    rng = np.random.default_rng(seed)
    if mode == "uniform":
        return rng.integers(0, 256, size=(n_frames, input_dim), dtype=np.uint8)
    if mode == "dense":
        return np.full((n_frames, input_dim), 0xFF, dtype=np.uint8)
    if mode == "zeros":
        return np.zeros((n_frames, input_dim), dtype=np.uint8)
    if mode == "byte-bernoulli":
        mask = rng.random((n_frames, input_dim)) < density
        return np.where(mask, 0xFF, 0).astype(np.uint8)
    if mode == "bit-bernoulli":
        bits = rng.random((n_frames, input_dim, 8)) < density
        return np.packbits(bits, axis=-1, bitorder="little").reshape(n_frames, input_dim)
    raise ValueError(f"unknown feature mode {mode!r}")


def cmd_gen_features(args) -> int:
    frames = gen_feature_frames(args.seed, args.frames, args.input_dim, args.mode, args.density)
    n_bytes = formats.save_features(args.out, frames)
    print(f"wrote {args.out}: {args.frames} frames x {args.input_dim}, {n_bytes} bytes")
    return EXIT_OK


# ---------------------------------------------------------------------------
# compress


def _synth_float_weights(seed: int, config: ModelConfig) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    return [rng.normal(0.0, 0.25, size=shape) for shape in config.layer_shapes()]


def cmd_compress(args) -> int:
    base = build_baseline_config(args.ts)
    base = replace(base, rnn_dim=args.dim, input_dim=args.input_dim, fc_dim=args.fc_dim)
    if args.infile:
        with np.load(args.infile) as data:
            weights = [data[f"layer{i}"] for i in range(5)]
        for w, shape in zip(weights, base.layer_shapes()):
            if w.shape != shape:
                raise formats.FormatError(
                    formats.FormatError.SIZE_MISMATCH,
                    f"input weights {w.shape} do not match the baseline {shape}",
                )
    else:
        weights = _synth_float_weights(args.seed, base)

    config, weights = prune_structured(base, args.target_dim, weights)
    weights[-1] = prune_unstructured(weights[-1], args.fc_sparsity)

    stages = metrics.model_size_report(base, args.target_dim, args.fc_sparsity, args.bits)
    rows = [(s.label, s.params, s.bytes, f"{s.megabytes:.2f} MB") for s in stages]
    print(_table(rows, header=("stage", "params", "bytes", "size")))

    if args.out:
        if args.bits != 4:
            print("model files store 4-bit weights; use --bits 4 to write one", file=sys.stderr)
            return EXIT_USAGE
        mats, shifts = [], []
        for w in weights:
            q, shift = quantize_values(w, args.bits)
            mats.append(QuantizedMatrix.from_values(q, shift))
            shifts.append(shift)
        config = replace(config, weight_scale_shift=tuple(shifts))
        model = Model(config, tuple(mats))
        n_bytes = formats.save_model(args.out, model)
        print(f"wrote {args.out}: {n_bytes} bytes")
    return EXIT_OK


# ---------------------------------------------------------------------------
# run


def _split_utterances(n_frames: int, utt_len: int | None) -> list[tuple[int, int]]:
    if not utt_len:
        return [(0, n_frames)]
    return [(s, min(s + utt_len, n_frames)) for s in range(0, n_frames, utt_len)]


def _run_golden_utt(model_blob: bytes, frames: np.ndarray, ts: int):
    model = formats.deserialize_model(model_blob)
    runner = golden.GoldenRunner(model, ts)
    return runner.run_utterance(frames)


def _run_accel_utt(
    model_blob: bytes,
    frames: np.ndarray,
    ts: int,
    skip: bool,
    merge: bool,
    cycle_trace: bool = False,
):
    from .accel import load_model
    from .accel.sim import run_frame_sim

    model = formats.deserialize_model(model_blob)
    options = SimOptions(time_steps=ts, skip=skip, merge=merge)
    state = load_model(model, ts)
    state.reset()
    out = np.zeros((len(frames), model.config.fc_dim), dtype=np.int16)
    total = None
    rows: list[str] = []
    for i, frame in enumerate(frames):
        if cycle_trace:
            logits, stats, events = run_frame_sim(state, frame, options, collect_events=True)
            rows.extend(
                f"{i} {stage} {pe} {cyc} {kind} {idx} {shift}"
                for stage, pe, cyc, kind, idx, shift in events
            )
        else:
            logits, stats = run_frame_sim(state, frame, options)
        out[i] = logits
        if total is None:
            total = stats
        else:
            total.add(stats)
    return out, total.to_dict(), rows


def cmd_run(args) -> int:
    model = formats.load_model_file(args.model)
    frames = formats.load_features(args.features)
    if frames.shape[1] != model.config.input_dim:
        raise formats.FormatError(
            formats.FormatError.SIZE_MISMATCH,
            f"features are {frames.shape[1]} wide, model expects {model.config.input_dim}",
        )
    ts = args.ts or model.config.time_steps
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        model_path=str(args.model),
        feature_path=str(args.features),
        time_steps=ts,
        skip=args.skip,
        merge=args.merge,
        engine=args.engine,
        utt_len=args.utt_len,
        jobs=args.jobs,
        cycle_trace=args.cycle_trace,
        out_dir=str(out_dir),
    )
    (out_dir / "run_config.json").write_text(json.dumps(manifest.__dict__, indent=2) + "\n")

    spans = _split_utterances(len(frames), args.utt_len)
    blob = formats.serialize_model(model)
    chunks = [frames[s:e] for s, e in spans]

    def fan_out(fn, argtuples):
        if args.jobs > 1 and len(chunks) > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                return list(pool.map(fn, *zip(*argtuples)))
        return [fn(*a) for a in argtuples]

    fc_scale = model.config.weight_scale_shift[-1]
    if args.engine in ("golden", "both"):
        results = fan_out(_run_golden_utt, [(blob, c, ts) for c in chunks])
        logits = np.concatenate([r[0] for r in results])
        formats.save_logits(out_dir / "golden_logits.bin", logits)
        trace_lines = []
        for r in results:
            trace_lines.extend(r[1].to_lines())
        (out_dir / "trace.txt").write_text("\n".join(trace_lines) + "\n")
        if args.dequantize:
            np.savetxt(out_dir / "golden_logits.txt", logits * 2.0**-fc_scale, fmt="%.6f")
        print(f"golden: {len(logits)} frames -> {out_dir / 'golden_logits.bin'}")
    if args.engine in ("accel", "both"):
        results = fan_out(
            _run_accel_utt,
            [(blob, c, ts, args.skip, args.merge, args.cycle_trace) for c in chunks],
        )
        logits = np.concatenate([r[0] for r in results])
        formats.save_logits(out_dir / "accel_logits.bin", logits)
        stats_dicts = [r[1] for r in results]
        combined = _combine_stats(stats_dicts)
        (out_dir / "stats.json").write_text(json.dumps(combined, indent=2) + "\n")
        if args.cycle_trace:
            lines = [row for r in results for row in r[2]]
            (out_dir / "cycle_trace.txt").write_text("\n".join(lines) + "\n")
        if args.dequantize:
            np.savetxt(out_dir / "accel_logits.txt", logits * 2.0**-fc_scale, fmt="%.6f")
        per_frame = combined["cycles"]["total"] / max(combined["frames"], 1)
        print(
            f"accel[{BACKEND}]: {len(logits)} frames, "
            f"{combined['cycles']['total']} cycles ({per_frame:.1f}/frame) "
            f"-> {out_dir / 'accel_logits.bin'}"
        )
    if args.engine == "both":
        a = formats.load_logits(out_dir / "golden_logits.bin")
        b = formats.load_logits(out_dir / "accel_logits.bin")
        print("outputs match" if np.array_equal(a, b) else "OUTPUTS DIFFER")
    return EXIT_OK


def _combine_stats(stats_dicts: list[dict]) -> dict:
    if len(stats_dicts) == 1:
        return stats_dicts[0]
    out = json.loads(json.dumps(stats_dicts[0]))
    # Densities are per-frame means per chunk; re-weight by frame count.
    density_sums = {
        k: sum(d["spike_density"][k] * d["frames"] for d in stats_dicts)
        for k in out["spike_density"]
    }

    def merge(dst, src, path=()):
        for key, val in src.items():
            if key in ("options", "spike_density"):
                continue
            if isinstance(val, dict):
                merge(dst[key], val, path + (key,))
            elif isinstance(val, list):
                dst[key] = [a + b for a, b in zip(dst[key], val)]
            elif isinstance(val, (int, float)) and not isinstance(val, bool):
                dst[key] += val

    for other in stats_dicts[1:]:
        merge(out, other)
    total_frames = sum(d["frames"] for d in stats_dicts)
    out["spike_density"] = {k: v / total_frames for k, v in density_sums.items()}
    out["options"] = stats_dicts[0]["options"]
    return out


# ---------------------------------------------------------------------------
# compare


def cmd_compare(args) -> int:
    a = formats.load_logits(args.golden)
    b = formats.load_logits(args.sim)
    if a.shape != b.shape:
        raise formats.FormatError(
            formats.FormatError.SIZE_MISMATCH, f"shapes differ: {a.shape} vs {b.shape}"
        )
    if np.array_equal(a, b):
        print(f"identical: {a.shape[0]} frames x {a.shape[1]} outputs")
        return EXIT_OK
    frame, idx = np.argwhere(a != b)[0]
    print(
        f"mismatch at frame {frame}, output {idx}: "
        f"{args.golden} has {a[frame, idx]}, {args.sim} has {b[frame, idx]}"
    )
    return EXIT_MISMATCH


# ---------------------------------------------------------------------------
# report


def cmd_report(args) -> int:
    config = _make_config(args)
    payload: dict = {}
    sections = []
    wants_trace = args.macs and args.rule in ("post_skip", "post_merge")
    trace = None
    if args.trace:
        trace = golden.SpikeTrace.load(args.trace, config.rnn_dim)
    elif wants_trace or args.sparsity:
        print("this report needs --trace", file=sys.stderr)
        return EXIT_USAGE

    if args.macs:
        rep = metrics.count_macs(config, args.ts, args.rule, trace)
        rows = [(k, v) for k, v in rep.per_layer.items()]
        rows.append(("total/frame", int(rep.macs_per_frame)))
        sections.append((f"accumulate ops ({rep.rule}, ts={args.ts}): "
                         f"{rep.mmacs_per_second:.2f} MMAC/s", rows))
        payload["macs"] = {
            "rule": rep.rule,
            "per_layer": rep.per_layer,
            "per_frame": rep.macs_per_frame,
            "mmacs_per_second": rep.mmacs_per_second,
        }
    if args.access:
        strategies = [args.strategy] if args.strategy else list(metrics.STRATEGIES)
        rows = []
        payload["access"] = {}
        for strat in strategies:
            rep = metrics.count_weight_accesses(config, args.ts, strat)
            rows.append((strat, rep.elements_per_frame, f"{rep.millions:.3f} M/s"))
            payload["access"][strat] = {
                "per_frame": rep.elements_per_frame,
                "millions": rep.millions,
            }
        sections.append((f"weight accesses (ts={args.ts})", rows))
    if args.size:
        stages = metrics.model_size_report(config, args.target_dim, args.fc_sparsity, args.bits)
        rows = [(s.label, s.params, s.bytes, f"{s.megabytes:.2f} MB") for s in stages]
        sections.append(("model size", rows))
        payload["size"] = [
            {"label": s.label, "params": s.params, "bytes": s.bytes} for s in stages
        ]
    if args.sparsity:
        rep = metrics.sparsity_from_trace(trace)
        rows = rep.rows()
        sections.append((f"zero fractions over {rep.frames} frames", rows))
        payload["sparsity"] = {name: frac for name, frac in rows}

    if not sections:
        print("nothing to report; pass --macs, --access, --size, or --sparsity", file=sys.stderr)
        return EXIT_USAGE
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        for title, rows in sections:
            print(f"# {title}")
            print(_table(rows))
            print()
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _add_dims(p, dim=128, ts=2):
    p.add_argument("--dim", type=int, default=dim, help="recurrent width")
    p.add_argument("--input-dim", type=int, default=40)
    p.add_argument("--fc-dim", type=int, default=1920)
    p.add_argument("--ts", type=int, default=ts, choices=(1, 2))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rsnnsim")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a random calibrated model file")
    p.add_argument("--seed", type=int, default=0)
    _add_dims(p)
    p.add_argument("--density", type=float, default=0.35, help="target spike density")
    p.add_argument("--fc-sparsity", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("gen-features", help="generate a feature file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", type=int, default=16)
    p.add_argument("--input-dim", type=int, default=40)
    p.add_argument("--mode", choices=FEATURE_MODES, default="uniform")
    p.add_argument("--density", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_features)

    p = sub.add_parser("compress", help="prune + quantize, print the size table")
    p.add_argument("--in", dest="infile", help="npz with float matrices layer0..layer4")
    p.add_argument("--seed", type=int, default=0, help="synthesize a float baseline")
    _add_dims(p, dim=256)
    p.add_argument("--target-dim", type=int, default=128)
    p.add_argument("--fc-sparsity", type=float, default=0.4)
    p.add_argument("--bits", type=int, default=4)
    p.add_argument("--out")
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("run", help="run the reference and/or the simulator")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--ts", type=int, choices=(1, 2))
    p.add_argument("--skip", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--merge", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--engine", choices=("golden", "accel", "both"), default="both")
    p.add_argument("--utt-len", type=int, help="carry resets every N frames")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--dequantize", action="store_true")
    p.add_argument("--cycle-trace", action="store_true",
                   help="write the per-cycle simulator event log")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="bytewise logit comparison")
    p.add_argument("golden")
    p.add_argument("sim")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("report", help="complexity/access/size/sparsity tables")
    _add_dims(p, dim=256)
    p.add_argument("--macs", action="store_true")
    p.add_argument("--rule", choices=metrics.RULES, default="dense")
    p.add_argument("--access", action="store_true")
    p.add_argument("--strategy", choices=metrics.STRATEGIES)
    p.add_argument("--size", action="store_true")
    p.add_argument("--target-dim", type=int, default=128)
    p.add_argument("--fc-sparsity", type=float, default=0.4)
    p.add_argument("--bits", type=int, default=4)
    p.add_argument("--sparsity", action="store_true")
    p.add_argument("--trace")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (formats.FormatError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, CalibrationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
