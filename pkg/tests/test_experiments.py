"""Experiment orchestration: config parsing, runs, reports, CLI exit codes."""

import numpy as np
import pytest
import yaml

from hmpyramid import Report, emit_report, make_rng, write_pgm
from hmpyramid.cli import main
from hmpyramid.errors import BudgetError, ConfigError
from hmpyramid.experiments import (
    parse_config,
    run_experiment,
    sample_random_architecture,
)


def _toy_dataset_section(toy_idx_dir):
    return {
        "kind": "idx",
        "name": "toy",
        "train_images": str(toy_idx_dir / "train-images"),
        "train_labels": str(toy_idx_dir / "train-labels"),
        "test_images": str(toy_idx_dir / "test-images"),
        "test_labels": str(toy_idx_dir / "test-labels"),
    }


def _base(toy_idx_dir, experiment, out, **overrides):
    cfg = {
        "experiment": experiment,
        "seed": 11,
        "out": str(out),
        "inits": ["pyramid", "random"],
        "dataset": _toy_dataset_section(toy_idx_dir),
        "train": {"epochs": 1, "learning_rate": 0.05},
        "pyramid": {"stage_epochs": 1},
    }
    if experiment == "probe":
        cfg["probe"] = {"architecture": [36, 16, 4], "iterations": 40}
    elif experiment == "replicate":
        cfg["replicate"] = {
            "deep_architecture": [36, 16, 4],
            "shallow_architecture": [36, 20],
            "n_values": [2, 4],
            "generate_count": 20,
        }
    elif experiment == "ten_machine":
        cfg["ten_machine"] = {"architectures": [[36, 16, 4]], "generate_count": 20}
    elif experiment == "transcend":
        cfg["transcend"] = {"architecture": [36, 16, 4], "g_schedule": [10, 20]}
    elif experiment == "multi_dataset":
        del cfg["dataset"]
        cfg["datasets"] = [
            dict(_toy_dataset_section(toy_idx_dir), architecture=[36, 16, 4]),
            dict(
                _toy_dataset_section(toy_idx_dir),
                name="toy2",
                architecture=[36, 9],
            ),
        ]
    cfg.update(overrides)
    return cfg


class TestParseConfig:
    def test_missing_seed(self, toy_idx_dir, tmp_path):
        cfg = _base(toy_idx_dir, "probe", tmp_path)
        del cfg["seed"]
        with pytest.raises(ConfigError, match="seed"):
            parse_config(cfg)

    def test_dotted_field_context(self, toy_idx_dir, tmp_path):
        cfg = _base(toy_idx_dir, "probe", tmp_path)
        cfg["train"] = {"epochs": "many"}
        with pytest.raises(ConfigError, match="train.epochs"):
            parse_config(cfg)

    def test_experiment_mismatch(self, toy_idx_dir, tmp_path):
        cfg = _base(toy_idx_dir, "probe", tmp_path)
        with pytest.raises(ConfigError, match="declares"):
            parse_config(cfg, "replicate")

    def test_unknown_init(self, toy_idx_dir, tmp_path):
        cfg = _base(toy_idx_dir, "probe", tmp_path, inits=["gaussian"])
        with pytest.raises(ConfigError, match="gaussian"):
            parse_config(cfg)

    def test_pyramid_init_needs_compatible_arch(self, toy_idx_dir, tmp_path):
        cfg = _base(toy_idx_dir, "probe", tmp_path)
        cfg["probe"]["architecture"] = [36, 15, 4]
        with pytest.raises(ConfigError, match="probe.architecture"):
            parse_config(cfg)
        cfg["inits"] = ["random"]
        parse_config(cfg)  # fine without pyramid init

    def test_replicate_parameter_ordering(self, toy_idx_dir, tmp_path):
        cfg = _base(toy_idx_dir, "replicate", tmp_path)
        cfg["replicate"]["deep_architecture"] = [36, 33]
        with pytest.raises(ConfigError, match="fewer generative"):
            parse_config(cfg)

    def test_replicate_generate_count(self, toy_idx_dir, tmp_path):
        cfg = _base(toy_idx_dir, "replicate", tmp_path)
        cfg["replicate"]["generate_count"] = 0
        with pytest.raises(ConfigError, match="generate_count"):
            parse_config(cfg)

    def test_ten_machine_needs_exactly_one_source(self, toy_idx_dir, tmp_path):
        cfg = _base(toy_idx_dir, "ten_machine", tmp_path)
        cfg["ten_machine"]["sweep"] = {"count": 2, "allowed_sides": [4, 3, 2]}
        with pytest.raises(ConfigError, match="exactly one"):
            parse_config(cfg)
        del cfg["ten_machine"]["architectures"]
        del cfg["ten_machine"]["sweep"]
        with pytest.raises(ConfigError, match="exactly one"):
            parse_config(cfg)

    def test_pool_count_divisibility(self, toy_idx_dir, tmp_path):
        cfg = _base(toy_idx_dir, "ten_machine", tmp_path)
        cfg["ten_machine"]["generate_count"] = 25
        with pytest.raises(ConfigError, match="divisible by 10"):
            parse_config(cfg)

    def test_transcend_schedule_monotone(self, toy_idx_dir, tmp_path):
        cfg = _base(toy_idx_dir, "transcend", tmp_path)
        cfg["transcend"]["g_schedule"] = [20, 20]
        with pytest.raises(ConfigError, match="strictly increasing"):
            parse_config(cfg)

    def test_multi_dataset_needs_architecture(self, toy_idx_dir, tmp_path):
        cfg = _base(toy_idx_dir, "multi_dataset", tmp_path)
        del cfg["datasets"][1]["architecture"]
        with pytest.raises(ConfigError, match="architecture"):
            parse_config(cfg)

    def test_threads_positive(self, toy_idx_dir, tmp_path):
        cfg = _base(toy_idx_dir, "probe", tmp_path, threads=0)
        with pytest.raises(ConfigError, match="threads"):
            parse_config(cfg)

    def test_dataset_kind(self, toy_idx_dir, tmp_path):
        cfg = _base(toy_idx_dir, "probe", tmp_path)
        cfg["dataset"]["kind"] = "svhn"
        with pytest.raises(ConfigError, match="dataset.kind"):
            parse_config(cfg)

    def test_idx_needs_train_images(self, toy_idx_dir, tmp_path):
        cfg = _base(toy_idx_dir, "probe", tmp_path)
        del cfg["dataset"]["train_images"]
        with pytest.raises(ConfigError, match="train_images"):
            parse_config(cfg)


class TestSampleRandomArchitecture:
    SIDES = (25, 22, 17, 14, 10, 4)

    def test_deterministic(self):
        a = sample_random_architecture(make_rng(5, 0), 28, 1, 4, self.SIDES)
        b = sample_random_architecture(make_rng(5, 0), 28, 1, 4, self.SIDES)
        assert a.sizes == b.sizes

    def test_single_layer(self):
        arch = sample_random_architecture(make_rng(0, 0), 28, 1, 1, self.SIDES)
        assert arch.n_hidden == 1
        assert arch.sizes[0] == 784
        assert arch.sizes[1] in {s * s for s in self.SIDES}

    def test_always_pyramid_compatible(self):
        rng = make_rng(1, 0)
        for _ in range(50):
            arch = sample_random_architecture(rng, 28, 1, 4, self.SIDES)
            assert 1 <= arch.n_hidden <= 4
            assert arch.is_pyramid_compatible()
            sides = [int(np.sqrt(s)) for s in arch.sizes[1:]]
            assert all(a > b for a, b in zip(sides, sides[1:]))
            assert all(s in self.SIDES for s in sides)

    def test_depth_exceeds_sides(self):
        with pytest.raises(ValueError):
            sample_random_architecture(make_rng(0, 0), 28, 7, 7, self.SIDES)


class TestReportEmission:
    def test_csv_line_count(self, tmp_path):
        report = Report("probe", 1, rows=[{"a": 1}, {"a": 2}, {"a": 3}])
        paths = emit_report(report, tmp_path)
        text = paths[0].read_text()
        assert len(text.splitlines()) == 4

    def test_column_order_first_appearance(self, tmp_path):
        report = Report("probe", 1, rows=[{"b": 1, "a": 2}, {"c": 3}])
        emit_report(report, tmp_path)
        lines = (tmp_path / "metrics.csv").read_text().splitlines()
        assert lines[0] == "b,a,c"
        assert lines[1] == "1,2,"
        assert lines[2] == ",,3"

    def test_float_and_bool_formatting(self, tmp_path):
        report = Report("probe", 1, rows=[{"x": 0.1, "flag": True, "n": np.int64(4)}])
        emit_report(report, tmp_path)
        lines = (tmp_path / "metrics.csv").read_text().splitlines()
        assert lines[1] == "0.1,true,4"

    def test_pgm_half_gray(self, tmp_path):
        path = tmp_path / "gray.pgm"
        write_pgm(path, np.full((2, 3), 0.5))
        raw = path.read_bytes()
        assert raw.startswith(b"P5\n3 2\n255\n")
        assert raw[len(b"P5\n3 2\n255\n"):] == bytes([128] * 6)

    def test_manifest_contents(self, tmp_path):
        report = Report(
            "probe",
            7,
            rows=[{"a": 1}],
            config_echo={"train.epochs": 3},
            timings=[("train", 1.25)],
            started="2026-01-01T00:00:00Z",
            finished="2026-01-01T00:00:05Z",
        )
        emit_report(report, tmp_path)
        text = (tmp_path / "manifest.txt").read_text()
        assert "experiment = probe" in text
        assert "seed = 7" in text
        assert "rows = 1" in text
        assert "timing.train_s = 1.250" in text
        assert "config.train.epochs = 3" in text

    def test_sample_images_written(self, tmp_path):
        report = Report(
            "replicate", 1, rows=[], samples=[("samples/x/0.pgm", np.zeros((2, 2)))]
        )
        paths = emit_report(report, tmp_path)
        assert (tmp_path / "samples" / "x" / "0.pgm").exists()
        assert paths[-1].name == "0.pgm"


class TestRunProbe:
    def test_row_structure(self, toy_idx_dir, tmp_path):
        cfg = parse_config(_base(toy_idx_dir, "probe", tmp_path))
        report = run_experiment(cfg)
        # one row per (init, feature set, split): 2 inits x 4 sets x 2 splits
        assert len(report.rows) == 16
        for row in report.rows:
            assert row["experiment"] == "probe"
            assert row["init"] in ("pyramid", "random")
            assert row["split"] in ("train", "test")
            assert 0.0 <= row["accuracy"] <= 1.0

    def test_untrained_zero_machine_at_chance(self, toy_idx_dir, tmp_path):
        cfg = parse_config(
            _base(
                toy_idx_dir,
                "probe",
                tmp_path,
                inits=["zero"],
                train={"epochs": 0},
            )
        )
        report = run_experiment(cfg)
        # constant features cannot beat chance on balanced 10-class data
        for row in report.rows:
            assert row["accuracy"] <= 0.2


class TestRunReplicate:
    def test_rows_and_parameter_counts(self, toy_idx_dir, tmp_path):
        cfg = parse_config(_base(toy_idx_dir, "replicate", tmp_path))
        report = run_experiment(cfg)
        assert len(report.rows) == 2 * 3  # n values x machine kinds
        labels = {row["machine"] for row in report.rows}
        assert labels == {"deep_pyramid", "deep_random", "shallow_random"}
        for row in report.rows:
            if row["machine"].startswith("deep"):
                assert row["free_parameters"] == 4 + 36 * 16 + 16 * 4
            else:
                assert row["free_parameters"] == 20 + 36 * 20
            assert row["entropy_raw"] >= 0.0
            assert row["unrepresented"] >= 0
            if row["n_train"] >= 2:
                assert 0.0 <= row["normalized_entropy"] <= 1.0 + 1e-12


class TestRunTenMachine:
    def test_condition_and_machine_rows(self, toy_idx_dir, tmp_path):
        cfg = parse_config(
            _base(toy_idx_dir, "ten_machine", tmp_path, inits=["random"])
        )
        report = run_experiment(cfg)
        condition = [r for r in report.rows if r.get("row") != "machine"]
        machines = [r for r in report.rows if r.get("row") == "machine"]
        assert len(condition) == 1
        assert len(machines) == 10
        assert {r["class"] for r in machines} == set(range(10))
        head = condition[0]
        assert head["depth"] == 2 and head["hidden_units"] == 20
        assert 0.0 <= head["accuracy_train_split"] <= 1.0
        assert 0.0 <= head["accuracy_test_split"] <= 1.0
        assert head["improvement_factor"] > 0.0
        assert head["novelty"] >= 0.0

    def test_sweep_generates_architectures(self, toy_idx_dir, tmp_path):
        cfg = _base(toy_idx_dir, "ten_machine", tmp_path, inits=["random"])
        del cfg["ten_machine"]["architectures"]
        cfg["ten_machine"]["sweep"] = {
            "count": 2,
            "min_depth": 1,
            "max_depth": 2,
            "allowed_sides": [4, 3, 2],
        }
        report = run_experiment(parse_config(cfg))
        condition = [r for r in report.rows if r.get("row") != "machine"]
        assert len(condition) == 2
        assert all(r["architecture"].startswith("36-") for r in condition)


class TestRunTranscend:
    def test_schedule_rows(self, toy_idx_dir, tmp_path):
        cfg = parse_config(
            _base(toy_idx_dir, "transcend", tmp_path, inits=["random"])
        )
        report = run_experiment(cfg)
        assert len(report.rows) == 2  # one per schedule entry
        baseline = {row["baseline_test"] for row in report.rows}
        assert len(baseline) == 1
        for row in report.rows:
            assert row["generated"] in (10, 20)
            assert isinstance(row["surpassed"], bool)


class TestRunMultiDataset:
    def test_per_dataset_rows(self, toy_idx_dir, tmp_path):
        cfg = parse_config(
            _base(toy_idx_dir, "multi_dataset", tmp_path, inits=["random"])
        )
        report = run_experiment(cfg)
        condition = [r for r in report.rows if r.get("row") != "machine"]
        assert {r["dataset"] for r in condition} == {"toy", "toy2"}
        for row in condition:
            assert row["improvement_factor"] > 0.0


class TestDeterminism:
    def test_rerun_byte_identical(self, toy_idx_dir, tmp_path):
        blobs = []
        for run in range(2):
            out = tmp_path / f"run{run}"
            cfg = parse_config(_base(toy_idx_dir, "replicate", out))
            emit_report(run_experiment(cfg), out)
            blobs.append((out / "metrics.csv").read_bytes())
        assert blobs[0] == blobs[1]

    def test_threads_do_not_change_results(self, toy_idx_dir, tmp_path):
        blobs = []
        for threads in (1, 3):
            out = tmp_path / f"t{threads}"
            cfg = parse_config(
                _base(
                    toy_idx_dir,
                    "ten_machine",
                    out,
                    inits=["random"],
                    threads=threads,
                )
            )
            emit_report(run_experiment(cfg), out)
            blobs.append((out / "metrics.csv").read_bytes())
        assert blobs[0] == blobs[1]

    def test_rows_are_attributable(self, toy_idx_dir, tmp_path):
        cfg = parse_config(_base(toy_idx_dir, "replicate", tmp_path))
        report = run_experiment(cfg)
        keys = [tuple(sorted(row.items())) for row in report.rows]
        assert len(keys) == len(set(keys))


def _write_yaml(path, cfg):
    path.write_text(yaml.safe_dump(cfg))
    return path


class TestCli:
    def test_successful_run(self, toy_idx_dir, tmp_path, capsys):
        out = tmp_path / "results"
        cfg_path = _write_yaml(
            tmp_path / "cfg.yaml", _base(toy_idx_dir, "probe", out, inits=["random"])
        )
        code = main(["probe", "--config", str(cfg_path)])
        assert code == 0
        captured = capsys.readouterr()
        assert "wrote" in captured.out
        assert (out / "metrics.csv").exists()
        assert (out / "manifest.txt").exists()

    def test_config_error_exit_2(self, toy_idx_dir, tmp_path, capsys):
        cfg = _base(toy_idx_dir, "probe", tmp_path)
        del cfg["seed"]
        cfg_path = _write_yaml(tmp_path / "cfg.yaml", cfg)
        assert main(["probe", "--config", str(cfg_path)]) == 2
        assert "configuration error" in capsys.readouterr().err

    def test_missing_data_exit_3(self, toy_idx_dir, tmp_path, capsys):
        cfg = _base(toy_idx_dir, "probe", tmp_path, inits=["random"])
        cfg["dataset"]["train_images"] = str(tmp_path / "nope.idx")
        cfg_path = _write_yaml(tmp_path / "cfg.yaml", cfg)
        assert main(["probe", "--config", str(cfg_path)]) == 3
        assert "data error" in capsys.readouterr().err

    def test_runtime_error_exit_4(self, toy_idx_dir, tmp_path, monkeypatch, capsys):
        import hmpyramid.cli as cli_mod

        cfg_path = _write_yaml(
            tmp_path / "cfg.yaml",
            _base(toy_idx_dir, "probe", tmp_path, inits=["random"]),
        )
        monkeypatch.setattr(
            cli_mod,
            "run_experiment",
            lambda cfg: (_ for _ in ()).throw(BudgetError("too big")),
        )
        assert main(["probe", "--config", str(cfg_path)]) == 4
        assert "runtime error" in capsys.readouterr().err

    def test_dry_run_writes_nothing(self, toy_idx_dir, tmp_path, capsys):
        out = tmp_path / "results"
        cfg_path = _write_yaml(
            tmp_path / "cfg.yaml",
            _base(toy_idx_dir, "replicate", out, inits=["random"]),
        )
        assert main(["replicate", "--config", str(cfg_path), "--dry-run"]) == 0
        assert not out.exists()
        assert capsys.readouterr().out.strip()

    def test_seed_override_changes_metrics(self, toy_idx_dir, tmp_path):
        blobs = []
        for seed in (11, 12):
            out = tmp_path / f"s{seed}"
            cfg_path = _write_yaml(
                tmp_path / f"cfg{seed}.yaml",
                _base(toy_idx_dir, "replicate", out, inits=["random"]),
            )
            assert main(
                ["replicate", "--config", str(cfg_path), "--seed", str(seed)]
            ) == 0
            blobs.append((out / "metrics.csv").read_bytes())
        assert blobs[0] != blobs[1]

    def test_out_override(self, toy_idx_dir, tmp_path):
        cfg_path = _write_yaml(
            tmp_path / "cfg.yaml",
            _base(toy_idx_dir, "probe", tmp_path / "ignored", inits=["random"]),
        )
        out = tmp_path / "elsewhere"
        assert main(["probe", "--config", str(cfg_path), "--out", str(out)]) == 0
        assert (out / "metrics.csv").exists()
        assert not (tmp_path / "ignored").exists()

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit):
            main(["explode", "--config", "x.yaml"])
