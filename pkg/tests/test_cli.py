from __future__ import annotations

import os

from banditnet.cli import main


def write_cfg(tmp_path, text: str) -> str:
    path = tmp_path / "exp.cfg"
    path.write_text(text)
    return str(path)


TINY_CFG = """
experiment = single
t_horizon = 30
n_agents = 4
topology = ring
n_seeds = 3
master_seed = 2
"""


def test_validate_ok(tmp_path, capsys):
    path = write_cfg(tmp_path, TINY_CFG)
    assert main(["validate", path]) == 0
    assert "config ok" in capsys.readouterr().out


def test_validate_bad_alpha_exits_2(tmp_path, capsys):
    path = write_cfg(tmp_path, TINY_CFG + "alpha = 1.5\n")
    assert main(["validate", path]) == 2
    err = capsys.readouterr().err
    assert "alpha must lie in (0, 1)" in err


def test_missing_config_exits_2(tmp_path, capsys):
    assert main(["validate", str(tmp_path / "nope.cfg")]) == 2


def test_unknown_flag_exits_2(tmp_path, capsys):
    path = write_cfg(tmp_path, TINY_CFG)
    assert main(["run", path, "--frobnicate"]) == 2


def test_unknown_command_exits_2(capsys):
    assert main(["dance"]) == 2


def test_bounds_prints_constants(capsys):
    assert main(["bounds"]) == 0
    out = capsys.readouterr().out
    assert "rho = 0.05" in out
    assert "h1 = 0.1" in out
    assert "beta_0 = 3.48" in out


def test_run_writes_expected_files(tmp_path, capsys):
    path = write_cfg(tmp_path, TINY_CFG)
    out_dir = tmp_path / "results"
    code = main(["run", path, "--out", str(out_dir), "--seeds", "3", "--jobs", "1", "--quiet"])
    assert code == 0
    files = sorted(os.listdir(out_dir / "single"))
    assert files == ["aggregate.csv", "run_000.csv", "run_001.csv", "run_002.csv"]
    assert (out_dir / "summary.csv").exists()


def test_run_seed_override_changes_outputs(tmp_path):
    path = write_cfg(tmp_path, TINY_CFG)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["run", path, "--out", str(out_a), "--seed", "1", "--jobs", "1", "--quiet"]) == 0
    assert main(["run", path, "--out", str(out_b), "--seed", "9", "--jobs", "1", "--quiet"]) == 0
    raw_a = (out_a / "single" / "run_000.csv").read_bytes()
    raw_b = (out_b / "single" / "run_000.csv").read_bytes()
    assert raw_a != raw_b
