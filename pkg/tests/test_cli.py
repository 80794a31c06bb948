import json
import math

import numpy as np
import pytest

from memhop.cli import (EXIT_CHECK, EXIT_CONFIG, EXIT_OK, ConfigError,
                        load_config, main, validate_config)
from memhop.experiments import describe


def write_config(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def oracle_cfg(outdir):
    return {
        "schema": "memhop-experiment/1",
        "kind": "oracle-check",
        "seed": 1,
        "model": {"type": "two_level", "g": 1.0,
                  "initial_state": {"type": "basis", "index": 0}},
        "params": {"t_end": 3.0, "n_points": 31},
        "output": {"dir": str(outdir)},
    }


class TestConfigValidation:
    def test_unknown_field_rejected(self, tmp_path):
        cfg = oracle_cfg(tmp_path)
        cfg["mystery"] = 1
        path = write_config(tmp_path, cfg)
        assert main(["run", path]) == EXIT_CONFIG

    def test_unknown_param_rejected(self, tmp_path):
        cfg = oracle_cfg(tmp_path)
        cfg["params"]["bogus_knob"] = 2
        with pytest.raises(ConfigError, match="bogus_knob"):
            load_config(write_config(tmp_path, cfg), [])

    def test_malformed_json_is_config_error(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        assert main(["run", str(path)]) == EXIT_CONFIG

    def test_missing_kind_rejected(self, tmp_path):
        cfg = oracle_cfg(tmp_path)
        del cfg["kind"]
        assert main(["run", write_config(tmp_path, cfg)]) == EXIT_CONFIG

    def test_no_outputs_written_on_schema_error(self, tmp_path):
        outdir = tmp_path / "out"
        cfg = oracle_cfg(outdir)
        cfg["seed"] = -3
        assert main(["run", write_config(tmp_path, cfg)]) == EXIT_CONFIG
        assert not outdir.exists()

    def test_override_parsing(self, tmp_path):
        cfg = oracle_cfg(tmp_path)
        loaded = load_config(write_config(tmp_path, cfg),
                             ["params.t_end=5.5", "seed=9"])
        assert loaded["params"]["t_end"] == 5.5
        assert loaded["seed"] == 9

    def test_bad_override_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="KEY=VALUE"):
            load_config(write_config(tmp_path, oracle_cfg(tmp_path)),
                        ["params.t_end"])


class TestRun:
    def test_oracle_check_smoke(self, tmp_path, capsys):
        outdir = tmp_path / "out"
        cfg = oracle_cfg(outdir)
        assert main(["run", write_config(tmp_path, cfg), "--check"]) == EXIT_OK
        csv = outdir / "occupation_probabilities.csv"
        assert csv.exists()
        header = csv.read_text().splitlines()[0]
        assert header.startswith("# memhop-series/1")
        manifest = json.loads((outdir / "manifest.json").read_text())
        assert manifest["check"]["passed"] is True
        assert manifest["versions"]["memhop"]

    def test_check_failure_exit_code(self, tmp_path):
        # a duplicated ladder value cannot be strictly monotone
        cfg = {
            "schema": "memhop-experiment/1",
            "kind": "hbar2-convergence",
            "seed": 3,
            "params": {"hbar2_ladder": [1e-2, 1e-2], "n_seeds": 1,
                       "window": [0.3, 1.2]},
            "output": {"dir": str(tmp_path / "conv")},
        }
        assert main(["run", write_config(tmp_path, cfg), "--check"]) == EXIT_CHECK
        # the manifest still records what happened
        manifest = json.loads((tmp_path / "conv" / "manifest.json").read_text())
        assert manifest["check"]["passed"] is False

    def test_reproducible_artifacts(self, tmp_path):
        cfg = {
            "schema": "memhop-experiment/1",
            "kind": "trajectory",
            "seed": 17,
            "model": {"type": "two_level",
                      "initial_state": {"type": "angle", "theta": 0.4}},
            "params": {"hbar2": 1e-3, "t_end": 0.5, "epsilon_psi": 1e-9},
        }
        outputs = []
        for run in range(2):
            outdir = tmp_path / f"run{run}"
            code = main(["run", write_config(tmp_path, cfg),
                         "--out-dir", str(outdir)])
            assert code == EXIT_OK
            outputs.append((outdir / "events.jsonl").read_bytes())
        assert outputs[0] == outputs[1]
        m0 = json.loads((tmp_path / "run0" / "manifest.json").read_text())
        m1 = json.loads((tmp_path / "run1" / "manifest.json").read_text())
        assert m0["config_sha256"] == m1["config_sha256"]


class TestDescribe:
    def test_dry_run_touches_no_files(self, tmp_path, capsys):
        outdir = tmp_path / "none"
        cfg = oracle_cfg(outdir)
        assert main(["describe", write_config(tmp_path, cfg)]) == EXIT_OK
        assert not outdir.exists()
        plan = json.loads(capsys.readouterr().out)
        assert plan["kind"] == "oracle-check"

    def test_grid_cells_listed(self, tmp_path, capsys):
        cfg = {
            "schema": "memhop-experiment/1",
            "kind": "recurrence-scaling",
            "seed": 5,
            "params": {"sizes": [4, 8, 16],
                       "hbar2_values": [1e-4, 2e-4, 4e-4, 8e-4]},
        }
        assert main(["describe", write_config(tmp_path, cfg)]) == EXIT_OK
        plan = json.loads(capsys.readouterr().out)
        assert len(plan["cells"]) == 12

    def test_predicted_event_count_within_2x(self, tmp_path):
        # stationary equal superposition: predicted total rate is exact
        cfg = {
            "schema": "memhop-experiment/1",
            "kind": "trajectory",
            "seed": 23,
            "model": {"type": "two_level",
                      "initial_state": {"type": "angle",
                                        "theta": math.pi / 4}},
            "params": {"hbar2": 1e-3, "t_end": 4.0, "epsilon_psi": 1e-9},
        }
        plan = describe(load_config(write_config(tmp_path, cfg), []))
        predicted = plan["total_predicted_events"]

        outdir = tmp_path / "traj"
        assert main(["run", write_config(tmp_path, cfg),
                     "--out-dir", str(outdir)]) == EXIT_OK
        actual = sum(1 for _ in (outdir / "events.jsonl").open())
        assert predicted / 2 <= actual <= predicted * 2
