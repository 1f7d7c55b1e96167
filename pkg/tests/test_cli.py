"""
Tests for the topagg command-line interface.
"""

import json
import os

import pytest
import yaml

from topagg.cli import main
from topagg.cli_parser import create_parser, parse_args

SMALL_CONFIG = {
    "pate": {
        "teachers": 10,
        "k": 1,
        "sigma": 20.0,
        "beta": 0.5,
        "epsilon_target": 5.0,
        "dataset_size": 300,
        "holdout": 100,
        "batch_size": 4,
        "iterations": 2,
        "hidden": 4,
        "teacher_batch": 4,
    },
    "dpsgd": {"batch_size": 20, "samples": 100, "dim": 5, "epochs": 2, "seeds": 2, "scenarios": ["ClippedSGD", "GM_DP"]},
    "convergence": {"workers": 4, "dim": 10, "samples_per_worker": 5, "k": 5, "iterations": 30, "seeds": 3, "k_sweep": [2, 8], "weibull_trials": 5},
    "compress_bench": {"teachers": 10, "dim": 32, "k": 4, "sketch_width": 16, "trials": 2},
}


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(SMALL_CONFIG))
    return str(path)


def _read(path):
    with open(path, "rb") as f:
        return f.read()


class TestParser:
    def test_accountant_arguments(self):
        args = parse_args(["accountant", "--k", "200", "--sigma", "5000", "--delta", "1e-5", "--rounds", "3"])
        assert args["command"] == "accountant"
        assert (args["k"], args["sigma"], args["delta"], args["rounds"]) == (200, 5000.0, 1e-5, 3)
        assert args["epsilon_target"] is None

    def test_missing_delta(self):
        with pytest.raises(SystemExit) as exc:
            parse_args(["accountant", "--k", "1", "--sigma", "5", "--rounds", "1"])
        assert exc.value.code == 2

    def test_rounds_and_target_are_exclusive(self):
        with pytest.raises(SystemExit):
            parse_args(["accountant", "--k", "1", "--sigma", "5", "--delta", "1e-5", "--rounds", "1", "--epsilon-target", "1"])

    @pytest.mark.parametrize("flag,value", [("--k", "0"), ("--sigma", "-1"), ("--delta", "1.5"), ("--q-tilde", "1.5")])
    def test_out_of_range(self, flag, value):
        argv = ["accountant", "--k", "1", "--sigma", "5", "--delta", "1e-5", "--rounds", "1"]
        if flag in argv:
            argv[argv.index(flag) + 1] = value
        else:
            argv += [flag, value]
        with pytest.raises(SystemExit) as exc:
            parse_args(argv)
        assert exc.value.code == 2

    def test_harness_defaults(self, monkeypatch):
        monkeypatch.setenv("TOPAGG_OUTPUT_DIR", "/tmp/topagg-env")
        args = vars(create_parser().parse_args(["dpsgd"]))
        assert args["output"] == "/tmp/topagg-env"
        assert args["workers"] == 1
        assert args["format"] == "text"
        assert args["preset"] is None

    def test_unknown_preset(self):
        with pytest.raises(SystemExit):
            parse_args(["pate", "--preset", "mnist-eps100"])


class TestAccountantCommand:
    def test_rounds_within_budget(self, capsys):
        assert main(["accountant", "--k", "200", "--sigma", "5000", "--delta", "1e-5", "--epsilon-target", "1.0"]) == 0
        assert int(capsys.readouterr().out.strip()) == 1301

    def test_epsilon_table(self, capsys):
        assert main(["accountant", "--k", "200", "--sigma", "5000", "--delta", "1e-5", "--rounds", "2"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "round epsilon_indep epsilon_dep_uncapped"
        first = lines[1].split()
        assert first[0] == "1"
        assert float(first[1]) == pytest.approx(0.02716, rel=0.01)
        assert len(lines) == 3

    def test_json_output(self, capsys):
        assert main(["accountant", "--k", "1", "--sigma", "80", "--delta", "1e-5", "--rounds", "2", "--q-tilde", "0.5", "--format", "json"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert [r["round"] for r in payload["rounds"]] == [1, 2]
        assert all(r["q_tilde"] == 0.5 for r in payload["rounds"])
        assert payload["rounds"][1]["epsilon_indep"] > payload["rounds"][0]["epsilon_indep"]


class TestHarnessCommands:
    def test_pate_writes_results(self, config_file, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["pate", "-c", config_file, "-o", str(out)]) == 0
        for name in ("pate_rounds.jsonl", "pate_rounds.csv", "pate_synthetic.csv", "summary.md"):
            assert (out / name).is_file()
        lines = (out / "pate_rounds.jsonl").read_text().splitlines()
        meta = json.loads(lines[0])
        assert meta["type"] == "meta"
        assert meta["subcommand"] == "pate"
        assert len(lines) == 9
        assert "aggregations: 8" in capsys.readouterr().out

    def test_pate_reruns_are_byte_identical(self, config_file, tmp_path):
        first, second = tmp_path / "a", tmp_path / "b"
        assert main(["pate", "-c", config_file, "-o", str(first)]) == 0
        assert main(["pate", "-c", config_file, "-o", str(second), "--workers", "3"]) == 0
        for name in sorted(os.listdir(first)):
            assert _read(first / name) == _read(second / name), name

    def test_seed_override_changes_hash(self, config_file, tmp_path):
        assert main(["pate", "-c", config_file, "-o", str(tmp_path / "a")]) == 0
        assert main(["pate", "-c", config_file, "-o", str(tmp_path / "b"), "--seed", "9"]) == 0
        meta_a = json.loads((tmp_path / "a" / "pate_rounds.jsonl").read_text().splitlines()[0])
        meta_b = json.loads((tmp_path / "b" / "pate_rounds.jsonl").read_text().splitlines()[0])
        assert meta_b["seed"] == 9
        assert meta_a["config_hash"] != meta_b["config_hash"]

    def test_pate_infeasible_budget(self, config_file, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["pate", "-c", config_file, "-o", str(out), "--epsilon-target", "0.01"]) == 3
        assert "Error:" in capsys.readouterr().err
        assert len((out / "pate_rounds.jsonl").read_text().splitlines()) == 1

    def test_bad_config(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"pate": {"teachers": 7, "dataset_size": 300, "holdout": 100}}))
        assert main(["pate", "-c", str(path), "-o", str(tmp_path / "out")]) == 2
        assert "do not divide" in capsys.readouterr().err

    def test_missing_config(self, tmp_path):
        assert main(["dpsgd", "-c", str(tmp_path / "nope.yaml"), "-o", str(tmp_path / "out")]) == 2

    def test_dpsgd(self, config_file, tmp_path, capsys, mock_render_template):
        out = tmp_path / "out"
        assert main(["dpsgd", "-c", config_file, "-o", str(out), "--format", "json"]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert set(summary) == {"ClippedSGD", "GM_DP"}
        assert (out / "summary.md").read_text() == "# summary\n"
        mock_render_template.assert_called_once()
        rows = (out / "dpsgd_control.csv").read_text().splitlines()
        assert rows[0].startswith("# topagg ")
        assert len(rows) == 2 + 4

    def test_convergence(self, config_file, tmp_path, capsys, mock_render_template):
        out = tmp_path / "out"
        assert main(["convergence", "-c", config_file, "-o", str(out)]) == 0
        report = json.loads((out / "bound_report.json").read_text())
        assert report["report"]["pass"] is True
        assert "meta" in report
        assert (out / "tau_profile.csv").is_file()
        assert "k=5:" in capsys.readouterr().out

    def test_compress_bench(self, config_file, tmp_path, capsys, mock_render_template):
        out = tmp_path / "out"
        assert main(["compress-bench", "-c", config_file, "-o", str(out)]) == 0
        records = [json.loads(line) for line in (out / "compress_bench.jsonl").read_text().splitlines()]
        assert records[0]["type"] == "meta"
        assert {r["method"] for r in records[1:]} == {"topagg", "topagg_no_threshold", "d2pfed", "fetchsgd"}
        assert "cosine" in capsys.readouterr().out

    def test_unwritable_output(self, config_file, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        assert main(["compress-bench", "-c", config_file, "-o", str(blocker / "out")]) == 2
