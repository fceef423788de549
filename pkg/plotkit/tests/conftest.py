"""Shared fixtures: real CSV inputs produced by the scalesim CLI.

plotkit is coupled to scalesim only through CSV schemas, so the fixtures
exercise exactly that boundary: they shell out to the simulator CLI and hand
the tests nothing but the files it wrote.
"""
from __future__ import annotations

import os
import subprocess
import sys
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parents[2]
D1_CONFIG = REPO_ROOT / "configs" / "d1.json"


def run_cli(args: list[str], **env_overrides) -> subprocess.CompletedProcess:
    env = dict(os.environ, **{k: str(v) for k, v in env_overrides.items()})
    return subprocess.run(
        [sys.executable, "-m", *args], capture_output=True, text=True, env=env
    )


@pytest.fixture(scope="session")
def d1_outputs(tmp_path_factory) -> dict[str, Path]:
    """losses.csv + a plotdata CSV from one seeded run of the d1 preset."""
    out_dir = tmp_path_factory.mktemp("d1-run")
    proc = run_cli(
        ["scalesim", "run", str(D1_CONFIG), "--out", str(out_dir)],
        SCALESIM_SEED="1",
    )
    assert proc.returncode == 0, proc.stderr
    losses = out_dir / "losses.csv"
    assert losses.exists(), "simulator run produced no losses.csv"

    shift_trace = out_dir / "trace_shift_alpha0.9_seed1.csv"
    assert shift_trace.exists(), sorted(p.name for p in out_dir.iterdir())
    plotdata = out_dir / "plotdata_shift.csv"
    proc = run_cli(
        ["scalesim", "plotdata", str(shift_trace), "--out", str(plotdata)]
    )
    assert proc.returncode == 0, proc.stderr
    return {"losses": losses, "plotdata": plotdata}
