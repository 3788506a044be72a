import json

import numpy as np
import pytest

from rsnnsim import formats
from rsnnsim.cli import main

from conftest import random_frames


def run_cli(*argv, capsys=None):
    code = main(list(argv))
    if capsys is None:
        return code, ""
    return code, capsys.readouterr().out


class TestGen:
    def test_deterministic_files(self, tmp_path):
        a, b = tmp_path / "a.rsnn", tmp_path / "b.rsnn"
        assert main(["gen", "--seed", "7", "--dim", "128", "--out", str(a)]) == 0
        assert main(["gen", "--seed", "7", "--dim", "128", "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_reports_pruned_param_count(self, tmp_path, capsys):
        code, out = run_cli(
            "gen", "--seed", "1", "--dim", "128", "--fc-sparsity", "0.4",
            "--density", "0.3", "--out", str(tmp_path / "m.rsnn"), capsys=capsys,
        )
        assert code == 0 and "201728 parameters" in out

    def test_zero_dim_is_usage_error(self, tmp_path):
        assert main(["gen", "--dim", "0", "--out", str(tmp_path / "x.rsnn")]) == 2

    def test_gen_features_modes(self, tmp_path):
        for mode in ("uniform", "dense", "zeros", "byte-bernoulli", "bit-bernoulli"):
            out = tmp_path / f"{mode}.feat"
            assert main([
                "gen-features", "--seed", "3", "--frames", "6", "--mode", mode,
                "--density", "0.4", "--out", str(out),
            ]) == 0
            frames = formats.load_features(out)
            assert frames.shape == (6, 40)


class TestCompress:
    def test_size_table(self, capsys):
        code, out = run_cli("compress", "--seed", "5", capsys=capsys)
        assert code == 0
        for token in ("698368", "300032", "201728", "2.79 MB", "1.20 MB", "0.81 MB", "0.10 MB"):
            assert token in out

    def test_zero_fc_sparsity_keeps_stage_sizes_equal(self, capsys):
        code, out = run_cli("compress", "--seed", "5", "--fc-sparsity", "0.0", capsys=capsys)
        assert code == 0
        assert out.count("1200128") == 2  # structured and unstructured stages

    def test_writes_loadable_model(self, tmp_path, capsys):
        out_path = tmp_path / "c.rsnn"
        code, _ = run_cli("compress", "--seed", "5", "--out", str(out_path), capsys=capsys)
        assert code == 0
        model = formats.load_model_file(out_path)
        assert model.config.rnn_dim == 128
        assert model.config.fc_dim == 1920

    def test_non_nibble_bits_cannot_write(self, tmp_path):
        assert main(["compress", "--bits", "8", "--out", str(tmp_path / "x.rsnn")]) == 2


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    model = root / "model.rsnn"
    feats = root / "feats.feat"
    assert main(["gen", "--seed", "11", "--dim", "128", "--density", "0.3",
                 "--out", str(model)]) == 0
    assert main(["gen-features", "--seed", "12", "--frames", "8", "--out", str(feats)]) == 0
    return root, model, feats


class TestRun:
    def test_both_engines_match_and_are_deterministic(self, workspace):
        root, model, feats = workspace
        out1, out2 = root / "r1", root / "r2"
        for out in (out1, out2):
            assert main(["run", "--model", str(model), "--features", str(feats),
                         "--out-dir", str(out)]) == 0
        golden = (out1 / "golden_logits.bin").read_bytes()
        accel = (out1 / "accel_logits.bin").read_bytes()
        assert golden == accel
        assert golden == (out2 / "golden_logits.bin").read_bytes()
        assert (out1 / "run_config.json").exists()
        assert (out1 / "trace.txt").exists()

    def test_dense_fixture_cycle_stats(self, workspace):
        root, model, feats = workspace
        out = root / "dense"
        assert main(["run", "--model", str(model), "--features", str(feats),
                     "--ts", "2", "--no-skip", "--no-merge", "--engine", "accel",
                     "--out-dir", str(out)]) == 0
        stats = json.loads((out / "stats.json").read_text())
        assert stats["cycles"]["total"] == 8 * 2464
        assert stats["options"] == {"time_steps": 2, "skip": False, "merge": False}

    def test_utterance_split_and_jobs(self, workspace):
        root, model, feats = workspace
        a, b = root / "utt1", root / "utt2"
        args = ["run", "--model", str(model), "--features", str(feats),
                "--utt-len", "3", "--engine", "golden"]
        assert main(args + ["--out-dir", str(a)]) == 0
        assert main(args + ["--jobs", "2", "--out-dir", str(b)]) == 0
        assert (a / "golden_logits.bin").read_bytes() == (b / "golden_logits.bin").read_bytes()

    def test_utterance_split_combines_stats(self, workspace):
        root, model, feats = workspace
        out_split, out_whole = root / "s1", root / "s2"
        base = ["run", "--model", str(model), "--features", str(feats), "--engine", "accel"]
        assert main(base + ["--utt-len", "3", "--out-dir", str(out_split)]) == 0
        assert main(base + ["--out-dir", str(out_whole)]) == 0
        split = json.loads((out_split / "stats.json").read_text())
        whole = json.loads((out_whole / "stats.json").read_text())
        assert split["frames"] == whole["frames"] == 8
        # acc_ops at the input layer are carry-independent, so they agree
        # across the utterance split; recurrent-tap counters legitimately
        # differ because each utterance restarts from a zero carry.
        assert (
            split["events"]["per_layer"]["l0_input"]
            == whole["events"]["per_layer"]["l0_input"]
        )
        for v in split["spike_density"].values():
            assert 0.0 <= v <= 1.0

    def test_feature_width_mismatch(self, workspace, tmp_path):
        root, model, _ = workspace
        bad = tmp_path / "bad.feat"
        formats.save_features(bad, random_frames(0, 4, 39))
        assert main(["run", "--model", str(model), "--features", str(bad),
                     "--out-dir", str(tmp_path)]) == 3

    def test_missing_file(self, tmp_path):
        assert main(["run", "--model", str(tmp_path / "nope.rsnn"),
                     "--features", str(tmp_path / "nope.feat"),
                     "--out-dir", str(tmp_path)]) == 3

    def test_cycle_trace_log(self, workspace):
        root, model, feats = workspace
        out = root / "ctrace"
        assert main(["run", "--model", str(model), "--features", str(feats),
                     "--engine", "accel", "--cycle-trace", "--out-dir", str(out)]) == 0
        lines = (out / "cycle_trace.txt").read_text().splitlines()
        assert lines
        frame, stage, pe_set, cycle, kind, index, shift = lines[0].split()
        assert stage == "l0_input" and kind == "bit"
        stats = json.loads((out / "stats.json").read_text())
        assert len(lines) >= stats["cycles"]["total"]

    def test_dequantize_writes_reals(self, workspace):
        root, model, feats = workspace
        out = root / "deq"
        assert main(["run", "--model", str(model), "--features", str(feats),
                     "--engine", "golden", "--dequantize", "--out-dir", str(out)]) == 0
        values = np.loadtxt(out / "golden_logits.txt")
        assert values.shape == (8, 1920)


class TestCompare:
    def test_identical_files(self, workspace):
        root, _, _ = workspace
        out = root / "r1"
        assert main(["compare", str(out / "golden_logits.bin"),
                     str(out / "accel_logits.bin")]) == 0

    def test_single_flipped_value(self, tmp_path, capsys):
        logits = np.zeros((3, 8), dtype=np.int16)
        formats.save_logits(tmp_path / "a.bin", logits)
        logits[1, 5] = 42
        formats.save_logits(tmp_path / "b.bin", logits)
        code = main(["compare", str(tmp_path / "a.bin"), str(tmp_path / "b.bin")])
        out = capsys.readouterr().out
        assert code == 1
        assert "frame 1" in out and "output 5" in out and "42" in out

    def test_shape_mismatch(self, tmp_path):
        formats.save_logits(tmp_path / "a.bin", np.zeros((2, 8), dtype=np.int16))
        formats.save_logits(tmp_path / "b.bin", np.zeros((3, 8), dtype=np.int16))
        assert main(["compare", str(tmp_path / "a.bin"), str(tmp_path / "b.bin")]) == 3


class TestReport:
    def test_macs_row(self, capsys):
        code, out = run_cli("report", "--macs", "--dim", "256", "--ts", "2", capsys=capsys)
        assert code == 0 and "145.82 MMAC/s" in out

    def test_access_strategy(self, capsys):
        code, out = run_cli("report", "--access", "--dim", "256", "--ts", "2",
                            "--strategy", "ts_unfolding", capsys=capsys)
        assert code == 0 and "770048" in out and "0.770 M/s" in out

    def test_size_table_json(self, capsys):
        code, out = run_cli("report", "--size", "--dim", "256", "--json", capsys=capsys)
        assert code == 0
        payload = json.loads(out)
        assert [s["bytes"] for s in payload["size"]] == [2793472, 1200128, 806912, 100864]

    def test_sparsity_of_silent_trace(self, tmp_path, capsys):
        from conftest import random_model, small_config
        from rsnnsim.golden import GoldenRunner

        model = random_model(1, small_config(rnn=128, inp=40, fc=1920), thresholds=(2048, 2048))
        _, trace = GoldenRunner(model).run_utterance(np.zeros((3, 40), dtype=np.uint8))
        path = tmp_path / "trace.txt"
        trace.save(path)
        code, out = run_cli("report", "--sparsity", "--dim", "128",
                            "--trace", str(path), capsys=capsys)
        assert code == 0
        for line in out.splitlines():
            if line.partition(" ")[0].startswith(("input_bits", "l0.", "l1.", "fc.")):
                assert line.split()[-1] == "1.0"

    def test_trace_rules_require_trace(self):
        assert main(["report", "--macs", "--rule", "post_skip"]) == 2

    def test_no_section_is_usage_error(self):
        assert main(["report"]) == 2
