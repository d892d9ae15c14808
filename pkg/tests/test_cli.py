"""End-to-end tests for the command-line interface."""

import json

import pytest

from latentbo import cli


@pytest.fixture()
def config_path(tmp_path):
    doc = {
        "benchmark": "rastrigin",
        "strategy": "gp_raw",
        "pool.size": 30,
        "seeds": [0, 1],
        "budget": 3,
        "n_init": 2,
        "retrain.interval": 2,
        "retrain.epochs": 3,
        "warmstart.epochs": 3,
        "pretrain.epochs": 5,
        "encoder.hidden": [8, 4],
        "out": str(tmp_path / "runs"),
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return path


def run_dir_from_stdout(capsys):
    out = capsys.readouterr().out
    first = out.splitlines()[0]
    assert first.startswith("wrote ")
    from pathlib import Path

    return Path(first.removeprefix("wrote "))


class TestRunVerb:
    def test_run_writes_traces_and_exits_zero(self, config_path, capsys):
        code = cli.main(["run", "--config", str(config_path)])
        assert code == 0
        out_dir = run_dir_from_stdout(capsys)
        assert (out_dir / "trace-seed0.csv").exists()
        assert (out_dir / "trace-seed1.csv").exists()
        assert (out_dir / "aggregate.csv").exists()
        assert (out_dir / "manifest.json").exists()

    def test_seeds_and_out_flags(self, config_path, tmp_path, capsys):
        code = cli.main(
            ["run", "--config", str(config_path), "--seeds", "4,5",
             "--out", str(tmp_path / "alt")]
        )
        assert code == 0
        out_dir = run_dir_from_stdout(capsys)
        assert out_dir.parent == tmp_path / "alt"
        assert (out_dir / "trace-seed4.csv").exists()

    def test_override_flag_reaches_manifest(self, config_path, capsys):
        code = cli.main(
            ["run", "--config", str(config_path), "--override", "penalty.zeta=0.25"]
        )
        assert code == 0
        out_dir = run_dir_from_stdout(capsys)
        man = json.loads((out_dir / "manifest.json").read_text())
        assert man["config"]["penalty.zeta"] == 0.25


class TestErrorReporting:
    def test_config_error_exits_2_with_json_record(self, config_path, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"benchmark": "rastrigin", "strategy": "loco", "bogus": 1}')
        code = cli.main(["run", "--config", str(bad)])
        assert code == 2
        record = json.loads(capsys.readouterr().err.strip())
        assert record["error"] == "ConfigError"
        assert record["key"] == "bogus"
        assert record["line"] == 1

    def test_runtime_error_exits_1_with_json_record(self, config_path, capsys, tmp_path):
        code = cli.main(
            ["dump-latent", "--config", str(config_path),
             "--checkpoint", str(tmp_path / "missing.json")]
        )
        assert code == 1
        record = json.loads(capsys.readouterr().err.strip())
        assert record["error"] == "ExperimentError"

    def test_bad_seeds_flag_exits_2(self, config_path, capsys):
        code = cli.main(["run", "--config", str(config_path), "--seeds", "1,x"])
        assert code == 2
        record = json.loads(capsys.readouterr().err.strip())
        assert record["key"] == "seeds"


class TestValidateVerb:
    def test_valid_config_prints_resolved_keys(self, config_path, capsys):
        assert cli.main(["validate", "--config", str(config_path)]) == 0
        resolved = json.loads(capsys.readouterr().out)
        assert resolved["benchmark"] == "rastrigin"
        assert resolved["penalty.lambda"] == "auto"
        assert resolved["retrain.interval"] == 2

    def test_invalid_value_exits_2(self, config_path, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"benchmark": "rastrigin", "strategy": "loco", "budget": -1}')
        assert cli.main(["validate", "--config", str(bad)]) == 2


class TestBenchVerbs:
    def test_list_names_all_benchmarks(self, capsys):
        assert cli.main(["bench", "list"]) == 0
        out = capsys.readouterr().out
        for name in ("rastrigin", "sum_exp", "max_area"):
            assert name in out

    def test_export_writes_labeled_csv(self, tmp_path, capsys):
        target = tmp_path / "pool.csv"
        code = cli.main(
            ["bench", "export", "--name", "rastrigin", "--size", "25",
             "--seed", "3", "--out", str(target)]
        )
        assert code == 0
        lines = target.read_text().splitlines()
        assert lines[0] == "id,x0,x1,label"
        assert len(lines) == 26


class TestSweepVerb:
    def test_sweep_emits_per_value_aggregates(self, config_path, capsys):
        code = cli.main(
            ["sweep", "--config", str(config_path), "--param", "rho",
             "--values", "0,5"]
        )
        assert code == 0
        out_dir = run_dir_from_stdout(capsys)
        assert (out_dir / "sweep.json").exists()
        assert (out_dir / "rho-0" / "aggregate.csv").exists()
        assert (out_dir / "rho-1" / "aggregate.csv").exists()


class TestDumpVerb:
    def test_dump_roundtrip_via_cli(self, config_path, tmp_path, capsys):
        assert cli.main(["run", "--config", str(config_path)]) == 0
        out_dir = run_dir_from_stdout(capsys)
        target = tmp_path / "dump.jsonl"
        code = cli.main(
            ["dump-latent", "--config", str(config_path),
             "--checkpoint", str(out_dir / "checkpoint-seed0.json"),
             "--out", str(target)]
        )
        assert code == 0
        lines = target.read_text().splitlines()
        assert len(lines) == 30
        record = json.loads(lines[0])
        assert {"pool_id", "z", "y", "post_mean", "post_var", "ucb", "lambda_i"} <= set(record)
