"""Command-line plumbing: argument handling, output targets, exit codes."""
from __future__ import annotations

import json
import logging

import numpy as np
import pytest

from helpers import pause_gap_profiles
from turnlens._version import __version__
from turnlens.cli import dispatch, main
from turnlens.corpus import load_manifest, parse_conversation
from turnlens.experiment import tt_matrix
from turnlens.features import (
    FrameMatrix,
    fset_bytes,
    pool_functionals,
    pooled_feature_names,
    read_frmx,
    read_fset,
    write_fset,
    write_frmx,
)
from turnlens.learn import TrainedModel
from turnlens.selection import rank_relevant
from turnlens.synth import generate_dataset
from turnlens.turntaking import TT_FEATURE_NAMES, conversation_segments


def conversation_doc() -> dict:
    return {
        "id": "cli-conv",
        "labels": {"request": "process", "complaint": False},
        "split": "train",
        "channels": {
            "customer": [
                {"start": 0.0, "end": 1.0, "text": "hello there"},
                {"start": 1.5, "end": 2.5, "text": "are you there"},
            ],
            "agent": [{"start": 3.0, "end": 4.0, "text": "yes hello"}],
        },
    }


@pytest.fixture()
def conv_file(tmp_path):
    path = tmp_path / "conv.json"
    path.write_text(json.dumps(conversation_doc()), encoding="utf-8")
    return path


@pytest.fixture(scope="module")
def small_tt(small_manifest):
    return tt_matrix(small_manifest)


class TestVersionAndUsage:
    def test_version_exits_zero(self, capsys):
        assert dispatch(["--version"]) == 0
        assert capsys.readouterr().out == f"turnlens {__version__}\n"

    def test_help_exits_zero(self, capsys):
        assert dispatch(["--help"]) == 0
        assert "COMMAND" in capsys.readouterr().out

    def test_no_command_is_usage_error(self):
        assert dispatch([]) == 1

    def test_unknown_command(self):
        assert dispatch(["frobnicate"]) == 1

    def test_unknown_flag(self, conv_file):
        assert dispatch(["segment", "--in", str(conv_file), "--bogus"]) == 1

    def test_missing_required_argument(self):
        assert dispatch(["tt"]) == 1

    def test_bad_task_choice(self, small_manifest):
        argv = ["select", "--manifest", str(small_manifest.path), "--task", "mood"]
        assert dispatch(argv) == 1

    def test_main_raises_systemexit(self, monkeypatch, capsys):
        monkeypatch.setattr("sys.argv", ["turnlens", "--version"])
        with pytest.raises(SystemExit) as exc:
            main()
        assert exc.value.code == 0
        capsys.readouterr()


class TestLogging:
    def test_invalid_level_notice(self, monkeypatch, capsys):
        monkeypatch.setenv("TURNLENS_LOG", "LOUD")
        assert dispatch(["--version"]) == 0
        err = capsys.readouterr().err
        assert "ignoring invalid TURNLENS_LOG='loud'" in err
        assert "error|warn|info|debug" in err

    def test_valid_level_is_silent(self, monkeypatch, capsys):
        monkeypatch.setenv("TURNLENS_LOG", "ERROR")
        assert dispatch(["--version"]) == 0
        assert "ignoring" not in capsys.readouterr().err

    def test_data_errors_are_logged(self, tmp_path, caplog):
        missing = tmp_path / "nope.json"
        with caplog.at_level(logging.ERROR, logger="turnlens"):
            assert dispatch(["segment", "--in", str(missing)]) == 2
        assert "input file not found" in caplog.text


class TestSegment:
    def test_stdout_matches_library(self, conv_file, capsys):
        assert dispatch(["segment", "--in", str(conv_file)]) == 0
        out = capsys.readouterr().out
        conv = parse_conversation(conv_file.read_bytes())
        assert json.loads(out) == conversation_segments(conv, 0.2).to_dicts()
        assert out.endswith("\n")

    def test_out_file_matches_stdout(self, conv_file, tmp_path, capsys):
        dest = tmp_path / "segments.json"
        assert dispatch(["segment", "--in", str(conv_file), "--out", str(dest)]) == 0
        assert capsys.readouterr().out == ""
        assert dispatch(["segment", "--in", str(conv_file)]) == 0
        assert dest.read_text(encoding="utf-8") == capsys.readouterr().out

    def test_merge_gap_flag_coalesces(self, conv_file, capsys):
        # the 0.5 s customer pause survives the default gap but not 1.0 s
        assert dispatch(["segment", "--in", str(conv_file)]) == 0
        default_run = json.loads(capsys.readouterr().out)
        assert dispatch(["segment", "--in", str(conv_file), "--merge-gap", "1.0"]) == 0
        merged_run = json.loads(capsys.readouterr().out)
        assert len(default_run) == 5
        assert len(merged_run) == 3

    def test_malformed_conversation(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json", encoding="utf-8")
        assert dispatch(["segment", "--in", str(bad)]) == 2


class TestTT:
    def test_out_file_round_trips(self, small_manifest, small_tt, tmp_path):
        dest = tmp_path / "tt.fset"
        argv = ["tt", "--manifest", str(small_manifest.path), "--out", str(dest)]
        assert dispatch(argv) == 0
        loaded = read_fset(dest)
        assert loaded.feature_names == TT_FEATURE_NAMES
        assert loaded.ids == small_tt.ids
        assert np.array_equal(loaded.values, small_tt.values)
        assert (tmp_path / "tt.fset.names.json").is_file()

    def test_stdout_is_raw_payload(self, small_manifest, small_tt, capsysbinary):
        assert dispatch(["tt", "--manifest", str(small_manifest.path)]) == 0
        assert capsysbinary.readouterr().out == fset_bytes(small_tt)

    def test_missing_manifest(self, tmp_path):
        assert dispatch(["tt", "--manifest", str(tmp_path / "nope.json")]) == 2


class TestSelect:
    def test_ranking_matches_library(self, small_manifest, small_tt, capsys):
        argv = ["select", "--manifest", str(small_manifest.path), "--task", "complaint"]
        assert dispatch(argv) == 0
        got = json.loads(capsys.readouterr().out)
        train = small_tt.subset(small_manifest.ids("train"))
        labels = small_manifest.labels_for_task("complaint", "train")
        assert got == rank_relevant(train, labels).to_dicts()
        assert all(set(row) == {"feature", "gain_bits"} for row in got)

    def test_out_file(self, small_manifest, tmp_path):
        dest = tmp_path / "ranking.json"
        argv = [
            "select", "--manifest", str(small_manifest.path),
            "--task", "request", "--out", str(dest),
        ]
        assert dispatch(argv) == 0
        assert isinstance(json.loads(dest.read_text(encoding="utf-8")), list)


class TestPool:
    @pytest.fixture()
    def frame_dir(self, tmp_path):
        rng = np.random.default_rng(21)
        d = tmp_path / "frames"
        d.mkdir()
        for name, conv_id, n in (("a.frmx", "conv-a", 6), ("b.frmx", "conv-b", 4)):
            fm = FrameMatrix(conv_id, 20, rng.normal(size=(n, 3)).astype(np.float32))
            write_frmx(d / name, fm)
        return d

    def test_pools_every_file(self, frame_dir, tmp_path):
        dest = tmp_path / "pooled.fset"
        assert dispatch(["pool", "--frames", str(frame_dir), "--out", str(dest)]) == 0
        loaded = read_fset(dest)
        assert loaded.set_name == "pooled"
        assert loaded.ids == ("conv-a", "conv-b")
        assert loaded.feature_names == pooled_feature_names(3)
        expected = np.vstack(
            [pool_functionals(read_frmx(frame_dir / n)) for n in ("a.frmx", "b.frmx")]
        ).astype(np.float32)
        assert np.array_equal(loaded.values, expected)

    def test_set_name_flag(self, frame_dir, tmp_path):
        dest = tmp_path / "speech.fset"
        argv = ["pool", "--frames", str(frame_dir), "--set-name", "speech", "--out", str(dest)]
        assert dispatch(argv) == 0
        assert read_fset(dest).set_name == "speech"

    def test_mixed_widths_rejected(self, frame_dir, tmp_path):
        fm = FrameMatrix("conv-c", 20, np.zeros((2, 2), dtype=np.float32))
        write_frmx(frame_dir / "c.frmx", fm)
        assert dispatch(["pool", "--frames", str(frame_dir), "--out", str(tmp_path / "x")]) == 2

    def test_missing_directory(self, tmp_path):
        assert dispatch(["pool", "--frames", str(tmp_path / "nope")]) == 2

    def test_empty_directory(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        assert dispatch(["pool", "--frames", str(empty)]) == 2


class TestConcat:
    @pytest.fixture()
    def two_sets(self, tmp_path, small_tt):
        first = small_tt.select(["T1", "T2"], set_name="left")
        second = small_tt.select(["N1", "N2", "N3"], set_name="right")
        pa, pb = tmp_path / "left.fset", tmp_path / "right.fset"
        write_fset(pa, first)
        write_fset(pb, second)
        return pa, pb

    def test_widths_add(self, two_sets, tmp_path):
        pa, pb = two_sets
        dest = tmp_path / "joint.fset"
        assert dispatch(["concat", "--in", str(pa), str(pb), "--out", str(dest)]) == 0
        loaded = read_fset(dest)
        assert loaded.width == 5
        assert loaded.feature_names == ("left.T1", "left.T2", "right.N1", "right.N2", "right.N3")

    def test_set_name_override(self, two_sets, tmp_path):
        pa, pb = two_sets
        dest = tmp_path / "named.fset"
        argv = ["concat", "--in", str(pa), str(pb), "--set-name", "joint", "--out", str(dest)]
        assert dispatch(argv) == 0
        assert read_fset(dest).set_name == "joint"

    def test_disjoint_ids_rejected(self, two_sets, small_tt, tmp_path):
        pa, _ = two_sets
        stray = small_tt.select(["T3"], set_name="stray").subset(small_tt.ids[:5])
        pc = tmp_path / "stray.fset"
        write_fset(pc, stray)
        assert dispatch(["concat", "--in", str(pa), str(pc), "--out", str(tmp_path / "x")]) == 2


class TestTrain:
    def test_fixed_c_model_file(self, small_manifest, tmp_path):
        dest = tmp_path / "model.json"
        argv = [
            "train", "--manifest", str(small_manifest.path), "--task", "complaint",
            "--c", "1.0", "--out", str(dest),
        ]
        assert dispatch(argv) == 0
        trained = TrainedModel.load(dest)
        assert trained.C == 1.0
        assert trained.positive_label == "yes"
        assert trained.standardizer.mean.shape == (64,)

    def test_same_seed_same_bytes(self, small_manifest, tmp_path):
        outs = []
        for name in ("m1.json", "m2.json"):
            dest = tmp_path / name
            argv = [
                "train", "--manifest", str(small_manifest.path), "--task", "complaint",
                "--c", "0.5", "--seed", "0", "--out", str(dest),
            ]
            assert dispatch(argv) == 0
            outs.append(dest.read_bytes())
        assert outs[0] == outs[1]

    def test_fset_path_features_match_tt(self, small_manifest, small_tt, tmp_path):
        dump = tmp_path / "tt.fset"
        write_fset(dump, small_tt)
        models = []
        for features in ("TT", str(dump)):
            dest = tmp_path / f"model_{len(models)}.json"
            argv = [
                "train", "--manifest", str(small_manifest.path), "--task", "complaint",
                "--features", features, "--c", "1.0", "--out", str(dest),
            ]
            assert dispatch(argv) == 0
            models.append(dest.read_bytes())
        assert models[0] == models[1]

    def test_ttc_features_shrink_the_model(self, small_manifest, tmp_path):
        dest = tmp_path / "ttc.json"
        argv = [
            "train", "--manifest", str(small_manifest.path), "--task", "complaint",
            "--features", "TTc", "--c", "1.0", "--out", str(dest),
        ]
        assert dispatch(argv) == 0
        trained = TrainedModel.load(dest)
        assert 0 < trained.standardizer.mean.shape[0] < 64

    def test_stdout_json_is_deterministic(self, small_manifest, capsys):
        argv = [
            "train", "--manifest", str(small_manifest.path), "--task", "complaint",
            "--c", "1.0",
        ]
        assert dispatch(argv) == 0
        first = capsys.readouterr().out
        assert dispatch(argv) == 0
        assert capsys.readouterr().out == first
        assert TrainedModel.from_dict(json.loads(first)).positive_label == "yes"

    def test_grid_search_default(self, small_manifest, tmp_path):
        dest = tmp_path / "grid.json"
        argv = [
            "train", "--manifest", str(small_manifest.path), "--task", "complaint",
            "--out", str(dest),
        ]
        assert dispatch(argv) == 0
        assert TrainedModel.load(dest).C in tuple(2.0**k for k in range(-15, 6, 2))

    def test_grid_search_needs_devel(self, tmp_path):
        # two one-conversation profile blocks both land in train
        control, signal = pause_gap_profiles()
        manifest = generate_dataset([control, signal], [0.5, 0.5], 2, 0, tmp_path / "solo")
        assert not load_manifest(manifest).ids("devel")
        argv = ["train", "--manifest", str(manifest), "--task", "complaint"]
        assert dispatch(argv) == 2

    def test_class_weights_flag(self, tmp_path):
        # needs an imbalanced split AND active hinge terms: at C=1 the classes
        # separate cleanly and the reweighting cancels out of the optimum
        control, signal = pause_gap_profiles()
        manifest = generate_dataset([control, signal], [0.75, 0.25], 20, 5, tmp_path / "skew")
        plain, weighted = tmp_path / "plain.json", tmp_path / "weighted.json"
        base = ["train", "--manifest", str(manifest), "--task", "complaint", "--c", "0.0001"]
        assert dispatch(base + ["--out", str(plain)]) == 0
        assert dispatch(base + ["--class-weights", "--out", str(weighted)]) == 0
        assert plain.read_bytes() != weighted.read_bytes()


@pytest.fixture(scope="module")
def model_file(small_manifest, tmp_path_factory):
    dest = tmp_path_factory.mktemp("cli_model") / "model.json"
    argv = [
        "train", "--manifest", str(small_manifest.path), "--task", "complaint",
        "--c", "1.0", "--out", str(dest),
    ]
    assert dispatch(argv) == 0
    return dest


class TestEval:
    def test_devel_metrics(self, model_file, small_manifest, capsys):
        argv = [
            "eval", "--model", str(model_file), "--manifest", str(small_manifest.path),
            "--task", "complaint",
        ]
        assert dispatch(argv) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["split"] == "devel"
        assert payload["n"] == len(small_manifest.ids("devel"))
        assert payload["classes"] == ["no", "yes"]
        assert 0.0 <= payload["uar"] <= 1.0
        assert sum(sum(row) for row in payload["confusion"]) == payload["n"]
        assert set(payload["per_class_recall"]) == {"no", "yes"}

    def test_train_split_flag(self, model_file, small_manifest, capsys):
        argv = [
            "eval", "--model", str(model_file), "--manifest", str(small_manifest.path),
            "--task", "complaint", "--split", "train",
        ]
        assert dispatch(argv) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["split"] == "train"
        assert payload["n"] == len(small_manifest.ids("train"))

    def test_out_file(self, model_file, small_manifest, tmp_path):
        dest = tmp_path / "metrics.json"
        argv = [
            "eval", "--model", str(model_file), "--manifest", str(small_manifest.path),
            "--task", "complaint", "--out", str(dest),
        ]
        assert dispatch(argv) == 0
        assert "uar" in json.loads(dest.read_text(encoding="utf-8"))

    def test_width_mismatch(self, small_manifest, tmp_path):
        dest = tmp_path / "ttc.json"
        train_argv = [
            "train", "--manifest", str(small_manifest.path), "--task", "complaint",
            "--features", "TTc", "--c", "1.0", "--out", str(dest),
        ]
        assert dispatch(train_argv) == 0
        eval_argv = [
            "eval", "--model", str(dest), "--manifest", str(small_manifest.path),
            "--task", "complaint", "--features", "TT",
        ]
        assert dispatch(eval_argv) == 2

    def test_missing_model_is_os_error(self, small_manifest, tmp_path):
        argv = [
            "eval", "--model", str(tmp_path / "nope.json"),
            "--manifest", str(small_manifest.path), "--task", "complaint",
        ]
        assert dispatch(argv) == 3

    def test_malformed_model_is_data_error(self, small_manifest, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{oops", encoding="utf-8")
        argv = [
            "eval", "--model", str(bad), "--manifest", str(small_manifest.path),
            "--task", "complaint",
        ]
        assert dispatch(argv) == 2


class TestExperimentCommand:
    def test_runs_config_and_prints_table(self, small_manifest, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(
            json.dumps(
                {
                    "manifest": str(small_manifest.path),
                    "task": "complaint",
                    "feature_sets": ["TT"],
                    "out_dir": "out",
                    "c_grid": [2.0**-5, 2.0**-3],
                }
            ),
            encoding="utf-8",
        )
        assert dispatch(["experiment", "--config", str(config)]) == 0
        out = capsys.readouterr().out
        assert "feature set" in out and "UAR%" in out
        assert (tmp_path / "out" / "report.json").is_file()
        assert (tmp_path / "out" / "report.txt").is_file()

    def test_missing_config(self, tmp_path):
        assert dispatch(["experiment", "--config", str(tmp_path / "nope.json")]) == 2


class TestSynthCommand:
    @pytest.fixture()
    def profile_config(self, tmp_path):
        control, signal = pause_gap_profiles()
        config = tmp_path / "profiles.json"
        config.write_text(
            json.dumps(
                {"profiles": [control.to_dict(), signal.to_dict()], "n": 4, "seed": 9}
            ),
            encoding="utf-8",
        )
        return config

    def test_writes_dataset_and_prints_manifest(self, profile_config, tmp_path, capsys):
        out_dir = tmp_path / "ds"
        argv = ["synth", "--config", str(profile_config), "--out-dir", str(out_dir)]
        assert dispatch(argv) == 0
        printed = capsys.readouterr().out.strip()
        assert printed == str(out_dir / "manifest.json")
        assert len(load_manifest(printed).ids()) == 4

    def test_n_flag_overrides_config(self, profile_config, tmp_path, capsys):
        out_dir = tmp_path / "ds2"
        argv = [
            "synth", "--config", str(profile_config), "--out-dir", str(out_dir), "--n", "2",
        ]
        assert dispatch(argv) == 0
        assert len(load_manifest(capsys.readouterr().out.strip()).ids()) == 2

    def test_seed_flag_changes_output(self, profile_config, tmp_path, capsys):
        # the manifest layout is seed-independent; the timings inside are not
        first_files = []
        for seed, sub in (("9", "same"), ("10", "other")):
            out_dir = tmp_path / sub
            argv = [
                "synth", "--config", str(profile_config), "--out-dir", str(out_dir),
                "--seed", seed,
            ]
            assert dispatch(argv) == 0
            entry = json.loads((out_dir / "manifest.json").read_text(encoding="utf-8"))[0]
            first_files.append((out_dir / entry["path"]).read_bytes())
        capsys.readouterr()
        assert first_files[0] != first_files[1]

    def test_config_without_profiles(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"n": 3}), encoding="utf-8")
        assert dispatch(["synth", "--config", str(bad), "--out-dir", str(tmp_path / "d")]) == 2

    def test_size_missing_everywhere(self, tmp_path):
        control, _ = pause_gap_profiles()
        config = tmp_path / "nosize.json"
        config.write_text(json.dumps({"profiles": [control.to_dict()]}), encoding="utf-8")
        argv = ["synth", "--config", str(config), "--out-dir", str(tmp_path / "d")]
        assert dispatch(argv) == 2

    def test_malformed_config(self, tmp_path):
        bad = tmp_path / "mangled.json"
        bad.write_text("[1,", encoding="utf-8")
        assert dispatch(["synth", "--config", str(bad), "--out-dir", str(tmp_path / "d")]) == 2


class TestExitCodes:
    def test_os_error_is_three(self, conv_file, tmp_path):
        dest = tmp_path / "missing_dir" / "out.json"
        assert dispatch(["segment", "--in", str(conv_file), "--out", str(dest)]) == 3

    def test_unexpected_failure_is_three(self, conv_file, monkeypatch):
        def boom(*args, **kwargs):
            raise RuntimeError("wires crossed")

        monkeypatch.setattr("turnlens.cli.conversation_segments", boom)
        assert dispatch(["segment", "--in", str(conv_file)]) == 3
