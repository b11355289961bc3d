from __future__ import annotations

import subprocess
import sys

import pytest

CONNECTIVITY_CFG = """
experiment = single
t_horizon = 800
n_agents = 16
topology = k_regular
topo_k = {k}
alpha = 0.2
n_seeds = 2
master_seed = 5
"""

ALPHA_CFG = """
experiment = single
t_horizon = 600
n_agents = 8
topology = complete
alpha = {alpha}
n_seeds = 2
master_seed = 5
"""


def run_banditnet(args: list[str]) -> None:
    """Drive the simulator through its CLI: the only interface this
    package is allowed to consume (besides the CSV files it produces)."""
    proc = subprocess.run(
        [sys.executable, "-m", "banditnet.cli", *args],
        capture_output=True,
        text=True,
    )
    if proc.returncode != 0:
        raise RuntimeError(f"banditnet {' '.join(args)} failed: {proc.stderr}")


@pytest.fixture(scope="session")
def acceptance_csvs(tmp_path_factory):
    """Aggregate CSVs produced by real simulator runs at desk scale."""
    root = tmp_path_factory.mktemp("accept")
    paths = {"connectivity": [], "alpha": []}
    for k in (4, 15):
        cfg = root / f"conn_{k}.cfg"
        cfg.write_text(CONNECTIVITY_CFG.format(k=k))
        out = root / f"conn_{k}"
        run_banditnet(["run", str(cfg), "--out", str(out), "--jobs", "1", "--quiet"])
        paths["connectivity"].append(str(out / "single" / "aggregate.csv"))
    for alpha in (0.1, 0.3):
        cfg = root / f"alpha_{alpha}.cfg"
        cfg.write_text(ALPHA_CFG.format(alpha=alpha))
        out = root / f"alpha_{alpha}"
        run_banditnet(["run", str(cfg), "--out", str(out), "--jobs", "1", "--quiet"])
        paths["alpha"].append(str(out / "single" / "aggregate.csv"))
    return paths
