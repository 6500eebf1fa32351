"""Command-line behavior: exit codes, flag overrides, emitted files, and a
console-script smoke test."""

import json
import os
import shutil
import subprocess

import numpy as np
import pytest

from fedgp.harness.cli import (
    EXIT_CONFIG,
    EXIT_INGESTION,
    EXIT_NUMERICAL,
    EXIT_OK,
    main,
)


def run_main(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def write_config(tmp_path, d, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(d))
    return str(path)


class TestOracleCommand:
    def test_default_oracle_passes(self, capsys):
        code, out, _ = run_main(capsys, "oracle", "--seed", "1")
        assert code == EXIT_OK
        result = json.loads(out)
        assert result["pass"] is True
        assert set(result["methods"]) == {"cadmm", "pxadmm", "fedavg",
                                          "fedprox"}

    def test_method_flag_narrows_to_one_method(self, capsys):
        code, out, _ = run_main(capsys, "oracle", "--method", "cadmm")
        assert code == EXIT_OK
        assert list(json.loads(out)["methods"]) == ["cadmm"]

    def test_secure_aggregation_toggle(self, capsys):
        # masked fixed-point sums keep consensus on the quantization grid,
        # well inside the oracle's 1e-5 gap tolerance
        code, out, _ = run_main(capsys, "oracle", "--method", "cadmm",
                                "--secure-agg", "on")
        assert code == EXIT_OK
        assert json.loads(out)["pass"] is True

    def test_failed_self_test_exits_numerical(self, capsys, tmp_path):
        # one round of one local gradient step cannot reach the 1e-5 gap
        cfg = write_config(tmp_path, {
            "task": "quadratic_oracle", "seed": 0, "methods": ["fedavg"],
            "federation": {"max_rounds": 1, "local_iters": 1}})
        code, out, _ = run_main(capsys, "oracle", "--config", cfg)
        assert code == EXIT_NUMERICAL
        assert json.loads(out)["pass"] is False


class TestConfigErrors:
    def test_most_commands_require_config(self, capsys):
        for cmd in ("gen-data", "train", "predict", "eval", "compare"):
            code, _, err = run_main(capsys, cmd)
            assert code == EXIT_CONFIG, cmd
            assert "config error" in err

    def test_missing_config_file(self, capsys):
        code, _, err = run_main(capsys, "train", "--config", "/nowhere/c.json")
        assert code == EXIT_CONFIG
        assert "does not exist" in err

    def test_unparsable_config_file(self, capsys, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{nope")
        code, _, err = run_main(capsys, "train", "--config", str(path))
        assert code == EXIT_CONFIG
        assert "not valid JSON" in err

    def test_non_object_config_file(self, capsys, tmp_path):
        path = tmp_path / "arr.json"
        path.write_text("[1, 2]")
        code, _, err = run_main(capsys, "train", "--config", str(path))
        assert code == EXIT_CONFIG

    def test_unknown_config_key(self, capsys, tmp_path):
        cfg = write_config(tmp_path, {"task": "traffic", "seed": 0,
                                      "frobnicate": True})
        code, _, err = run_main(capsys, "train", "--config", cfg)
        assert code == EXIT_CONFIG
        assert "frobnicate" in err

    def test_train_requires_out_dir(self, capsys, tmp_path):
        cfg = write_config(tmp_path, {"task": "quadratic_oracle", "seed": 0})
        code, _, err = run_main(capsys, "train", "--config", cfg)
        assert code == EXIT_CONFIG
        assert "--out" in err

    def test_predict_rejects_oracle_task(self, capsys, tmp_path):
        cfg = write_config(tmp_path, {"task": "quadratic_oracle", "seed": 0})
        code, _, err = run_main(capsys, "predict", "--config", cfg,
                                "--out", str(tmp_path))
        assert code == EXIT_CONFIG
        assert "does not apply" in err

    def test_eval_needs_a_prior_train_run(self, capsys, tmp_path):
        cfg = write_config(tmp_path, {
            "task": "traffic", "seed": 0, "method": "cadmm",
            "params": {"days": 10, "n_clients": 2}})
        code, _, err = run_main(capsys, "eval", "--config", cfg)
        assert code == EXIT_CONFIG

    def test_bad_log_level_env(self, capsys, tmp_path, monkeypatch):
        monkeypatch.setenv("FEDGP_LOG", "loud")
        code, _, err = run_main(capsys, "oracle")
        assert code == EXIT_CONFIG
        assert "FEDGP_LOG" in err


class TestIngestionErrors:
    def test_malformed_data_file_exits_3(self, capsys, tmp_path):
        bad = tmp_path / "series.csv"
        bad.write_text("station_id,t_hours,prb_usage\n1,0,50\n1,1,150\n")
        cfg = write_config(tmp_path, {
            "task": "traffic", "seed": 0,
            "data": {"csv": {"series": str(bad)}}})
        code, _, err = run_main(capsys, "gen-data", "--config", cfg,
                                "--out", str(tmp_path / "out"))
        assert code == EXIT_INGESTION
        assert "ingestion error" in err and "line 3" in err


TRAFFIC_CFG = {
    "task": "traffic", "seed": 2,
    "params": {"days": 10, "n_clients": 2, "horizon_hours": 24.0},
    "federation": {"max_rounds": 3, "inner_max_iters": 25},
}


class TestEndToEndCommands:
    def test_gen_data_stamps_seed_override(self, capsys, tmp_path):
        cfg = write_config(tmp_path, TRAFFIC_CFG)
        out = tmp_path / "out"
        code, _, _ = run_main(capsys, "gen-data", "--config", cfg,
                              "--seed", "11", "--out", str(out))
        assert code == EXIT_OK
        head = open(out / "traffic.csv").read().splitlines()[:2]
        assert head[0].startswith("# config_sha256=")
        assert head[1] == "# seed=11"

    def test_train_runs_first_method_only(self, capsys, tmp_path):
        cfg = write_config(tmp_path, {
            "task": "tracking", "seed": 1,
            "methods": ["pxadmm", "cadmm"],
            "params": {"n_clients": 2, "traj_per_client": 3, "steps": 8,
                       "test_traj": 2, "centralized_baseline": False},
            "federation": {"max_rounds": 3, "inner_max_iters": 15}})
        out = tmp_path / "out"
        code, stdout, _ = run_main(capsys, "train", "--config", cfg,
                                   "--out", str(out))
        assert code == EXIT_OK
        result = json.loads(stdout)
        assert list(result["methods"]) == ["pxadmm"]
        assert os.path.exists(out / "model_pxadmm_x.json")
        assert not os.path.exists(out / "model_cadmm_x.json")

    def test_traffic_train_then_predict_then_eval(self, capsys, tmp_path):
        cfg = write_config(tmp_path, TRAFFIC_CFG)
        out = tmp_path / "out"
        code, stdout, _ = run_main(capsys, "train", "--config", cfg,
                                   "--out", str(out))
        assert code == EXIT_OK
        trained = json.loads(stdout)

        code, stdout, _ = run_main(capsys, "predict", "--config", cfg,
                                   "--out", str(out))
        assert code == EXIT_OK
        assert json.loads(stdout)["n_test"] == 24

        code, stdout, _ = run_main(capsys, "eval", "--config", cfg,
                                   "--out", str(out))
        assert code == EXIT_OK
        scored = json.loads(stdout)
        assert scored["nmse"] == trained["methods"]["cadmm"]["nmse"]

    def test_timings_flag_records_wall_clock(self, capsys, tmp_path):
        cfg = write_config(tmp_path, TRAFFIC_CFG)
        out = tmp_path / "out"
        code, _, _ = run_main(capsys, "train", "--config", cfg,
                              "--out", str(out), "--timings")
        assert code == EXIT_OK
        lines = [ln for ln in open(out / "history_cadmm.csv").read().splitlines()
                 if ln and not ln.startswith("#")]
        wall = [float(ln.split(",")[8]) for ln in lines[1:]]
        assert any(w > 0 for w in wall)

    def test_compare_emits_comparison_table(self, capsys, tmp_path):
        cfg = write_config(tmp_path, {
            "task": "quadratic_oracle", "seed": 4,
            "methods": ["cadmm", "fedavg"]})
        out = tmp_path / "out"
        code, stdout, _ = run_main(capsys, "compare", "--config", cfg,
                                   "--out", str(out))
        assert code == EXIT_OK
        result = json.loads(stdout)
        assert set(result["methods"]) == {"cadmm", "fedavg"}
        assert os.path.exists(out / "oracle_metrics.json")


class TestConsoleScript:
    def test_installed_entry_point(self, tmp_path):
        exe = shutil.which("fedgp")
        assert exe is not None, "console script should be on PATH"
        proc = subprocess.run([exe, "oracle", "--seed", "0"],
                              capture_output=True, text=True, timeout=300)
        assert proc.returncode == 0, proc.stderr
        assert json.loads(proc.stdout)["pass"] is True
