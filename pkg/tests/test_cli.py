import json
import subprocess
import sys

import pytest

from dftws.cli import default_threshold, main
from tests.test_codec import EMPTY_KECCAK


def write_config(tmp_path, **overrides):
    cfg = {"n_nodes": 5, "master_seed": 11, "random_bytes_len": 32, "deadline_tick": 100, "rounds": 1}
    cfg.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def simulate(tmp_path, name="out", **overrides):
    cfg = write_config(tmp_path, **overrides)
    paths = {k: tmp_path / f"{name}.{k}.json" for k in ("record", "log", "registry")}
    code = main(["simulate", "--config", str(cfg), "--record", str(paths["record"]),
                 "--log", str(paths["log"]), "--registry", str(paths["registry"])])
    return code, paths


def audit(paths):
    return main(["audit", "--record", str(paths["record"]), "--log", str(paths["log"]),
                 "--registry", str(paths["registry"])])


class TestSimulate:
    def test_honest(self, tmp_path):
        code, paths = simulate(tmp_path)
        assert code == 0
        assert all(p.exists() for p in paths.values())

    def test_deterministic(self, tmp_path):
        _, a = simulate(tmp_path, "a")
        _, b = simulate(tmp_path, "b")
        for k in a:
            assert a[k].read_bytes() == b[k].read_bytes()

    def test_missing_config(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "nope.json"), "--record", str(tmp_path / "r"),
                     "--log", str(tmp_path / "l")]) == 2
        assert list(tmp_path.iterdir()) == []

    def test_bad_config(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text('{"n_nodes": 0, "master_seed": 1}')
        assert main(["simulate", "--config", str(cfg), "--record", str(tmp_path / "r"),
                     "--log", str(tmp_path / "l")]) == 2

    def test_round_out_of_range(self, tmp_path):
        cfg = write_config(tmp_path)
        assert main(["simulate", "--config", str(cfg), "--record", str(tmp_path / "r"),
                     "--log", str(tmp_path / "l"), "--round", "3"]) == 2


class TestAudit:
    def test_honest(self, tmp_path, capsys):
        _, paths = simulate(tmp_path)
        capsys.readouterr()
        assert audit(paths) == 0
        assert capsys.readouterr().out.strip() == "[]"

    def test_omit_solver(self, tmp_path, capsys):
        _, paths = simulate(tmp_path, ra_behavior="OMIT_SOLVER")
        capsys.readouterr()
        assert audit(paths) == 1
        report = json.loads(capsys.readouterr().out)
        assert "OMITTED_SOLVER" in {v["code"] for v in report}

    def test_truncated_record(self, tmp_path):
        _, paths = simulate(tmp_path)
        text = paths["record"].read_text()
        paths["record"].write_text(text[: len(text) // 2])
        assert audit(paths) == 2

    def test_missing_file(self, tmp_path):
        _, paths = simulate(tmp_path)
        paths["log"].unlink()
        assert audit(paths) == 2


class TestStats:
    def test_single_node(self, capsys):
        assert main(["stats", "--nodes", "1", "--rounds", "40", "--seed", "1"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["index_counts"] == [40] and out["chi_square"] == 0.0

    def test_zero_threshold_fails(self):
        assert main(["stats", "--nodes", "3", "--rounds", "30", "--threshold", "0"]) == 1

    @pytest.mark.parametrize("argv", [
        ["stats", "--nodes", "0", "--rounds", "10"],
        ["stats", "--nodes", "3", "--rounds", "0"],
        ["stats", "--nodes", "x", "--rounds", "10"],
        ["stats", "--rounds", "10"],
    ])
    def test_invalid_numbers(self, argv):
        assert main(argv) == 2

    def test_default_threshold(self):
        assert default_threshold(5) == 23.5


class TestVectors:
    def test_output(self, capsys):
        assert main(["vectors"]) == 0
        first = capsys.readouterr().out
        data = json.loads(first)
        assert data["keccak256_empty"] == EMPTY_KECCAK
        assert data["fixture_winner_index"] == 1
        main(["vectors"])
        assert capsys.readouterr().out == first


def test_unknown_command():
    assert main(["frobnicate"]) == 2
    assert main([]) == 2


def test_console_entry_point_exit_codes(tmp_path):
    run = lambda *a: subprocess.run([sys.executable, "-m", "dftws.cli", *a], capture_output=True, text=True)
    assert run("vectors").returncode == 0
    assert run("audit", "--record", str(tmp_path / "x"), "--log", "y", "--registry", "z").returncode == 2
    assert run("bogus").returncode == 2
