"""Regenerate the golden CSVs consumed by the plotting frontend tests.

Runs the hbar2-convergence, recurrence-scaling and cat-state experiments
with their frozen seeds and copies the sweep CSVs into golden/.

    python3 scripts/make_goldens.py
"""

import json
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent

RUNS = [
    ("configs/hbar2_convergence.json", "hbar2_convergence.csv",
     "hbar2_convergence.csv"),
    ("configs/recurrence_scaling.json", "recurrence_scaling.csv",
     "recurrence_scaling.csv"),
    ("configs/cat_state.json", "cat_state_sweep.csv", "cat_state_sweep.csv"),
]


def main():
    golden = ROOT / "golden"
    golden.mkdir(exist_ok=True)
    for config, produced, target in RUNS:
        with tempfile.TemporaryDirectory() as tmp:
            print(f"running {config} ...", flush=True)
            code = subprocess.call(
                [sys.executable, "-m", "memhop.cli", "run",
                 str(ROOT / config), "--out-dir", tmp])
            if code != 0:
                raise SystemExit(f"{config} failed with exit code {code}")
            shutil.copy(Path(tmp) / produced, golden / target)
            print(f"  -> golden/{target}")


if __name__ == "__main__":
    main()
