"""Command-line surface: subcommands, outputs, exit codes."""

import json
from pathlib import Path

import pytest

import pqfl.simulation
from pqfl.cli import EXIT_CONFIG, EXIT_OK, EXIT_PROPERTY, main

SCENARIO = """
[federation]
clients = 6
rounds = 3
cohort = 6
mode = "plaintext"
aggregator = "fedavg"
seed = 2
kem = "mock"

[model]
hidden = [12, 6]
dropout = 0.0

[training]
learning_rate = 0.03
epochs = 1
batch_size = 32
samples = 600
features = 6
separation = 4.0
"""


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "scenario.toml"
    path.write_text(SCENARIO)
    return path


class TestRun:
    def test_writes_all_outputs(self, scenario_file, tmp_path, capsys):
        out = tmp_path / "results"
        code = main(["run", "--scenario", str(scenario_file), "--out", str(out)])
        assert code == EXIT_OK
        for name in ("rounds.jsonl", "reputations.csv", "bytes.csv",
                      "summary.json", "latency.csv"):
            assert (out / name).exists()
        stdout = capsys.readouterr().out
        assert "final accuracy" in stdout

    def test_seed_override_changes_outputs(self, scenario_file, tmp_path):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        main(["run", "--scenario", str(scenario_file), "--out", str(out_a)])
        main(["run", "--scenario", str(scenario_file), "--out", str(out_b),
              "--seed", "99"])
        assert (out_a / "rounds.jsonl").read_bytes() != (out_b / "rounds.jsonl").read_bytes()

    def test_mode_and_aggregator_override(self, scenario_file, tmp_path):
        out = tmp_path / "masked"
        code = main([
            "run", "--scenario", str(scenario_file), "--out", str(out),
            "--mode", "hybrid", "--aggregator", "reputation",
        ])
        assert code == EXIT_OK
        line = json.loads((out / "rounds.jsonl").read_text().splitlines()[0])
        assert line["bytes"]["0"]["kem_pk"] > 0  # secure path engaged

    def test_invalid_override_is_config_error(self, scenario_file, tmp_path, capsys):
        code = main([
            "run", "--scenario", str(scenario_file), "--out", str(tmp_path / "x"),
            "--mode", "masked", "--aggregator", "krum",
        ])
        assert code == EXIT_CONFIG
        assert "masking" in capsys.readouterr().err

    def test_bad_scenario_file_is_config_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.toml"
        bad.write_text("[federation]\nclients = 1\n")
        code = main(["run", "--scenario", str(bad), "--out", str(tmp_path / "o")])
        assert code == EXIT_CONFIG
        assert "invalid scenario" in capsys.readouterr().err

    def test_unknown_key_is_config_error(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text(SCENARIO + "\n[privacy]\nepsilonn = 1.0\n")
        code = main(["run", "--scenario", str(bad), "--out", str(tmp_path / "o")])
        assert code == EXIT_CONFIG


class TestVerifyMasking:
    def test_default_invocation_passes(self, capsys):
        code = main(["verify-masking", "--trials", "50"])
        assert code == EXIT_OK
        assert "masking OK" in capsys.readouterr().out

    def test_injected_fault_exits_3(self, monkeypatch, capsys):
        real = pqfl.simulation.verify_masking

        def with_fault(**kwargs):
            def corrupt(masked, trial):
                if trial == 0:
                    words = masked[0].words.copy()
                    words[2] += 1
                    masked[0] = type(masked[0])(
                        masked[0].client_id, words, masked[0].round_index
                    )
                return masked

            kwargs["corrupt_hook"] = corrupt
            return real(**kwargs)

        monkeypatch.setattr("pqfl.cli.verify_masking", with_fault)
        code = main(["verify-masking", "--trials", "3"])
        assert code == EXIT_PROPERTY
        out = capsys.readouterr().out
        assert "coordinate 2" in out


class TestAccountBytes:
    def test_prints_table(self, tmp_path, capsys):
        scenario = tmp_path / "reference.toml"
        scenario.write_text(
            """
            [federation]
            clients = 50
            rounds = 1
            cohort = 20
            mode = "masked"
            aggregator = "fedavg"
            kem = "ml-kem-1024"
            [model]
            preset = "reference"
            [training]
            samples = 5000
            features = 42
            """
        )
        code = main(["account-bytes", "--scenario", str(scenario)])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "parameters: 15873" in out
        assert "63492" in out
        assert "1568" in out


def test_repository_scenarios_parse_and_validate():
    root = Path(__file__).resolve().parents[1] / "scenarios"
    from pqfl import load_scenario

    files = sorted(root.glob("*.toml"))
    assert files
    for path in files:
        load_scenario(path)
