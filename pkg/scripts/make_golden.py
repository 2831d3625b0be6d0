"""Regenerate tests/golden from tests/fixtures.  Review the diff before committing."""

import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "tests" / "fixtures"
GOLDEN = ROOT / "tests" / "golden"

SOLVE = ["ia_uniform", "contract_two", "contract_three", "tv_producer", "ia_ternary", "ia_zero_mass", "uninformative"]
PLOT = ["ia_uniform", "contract_two", "tv_producer"]


def run(*args):
    res = subprocess.run([sys.executable, "-m", "menuforge", *args], capture_output=True, text=True)
    print(f"exit {res.returncode}: menuforge {' '.join(args)}")


def main():
    GOLDEN.mkdir(exist_ok=True)
    for name in SOLVE:
        run("solve", str(FIXTURES / f"{name}.json"), "--out", str(GOLDEN / f"{name}.json"))
    for name in PLOT:
        run("plot", str(FIXTURES / f"{name}.json"), "--out", str(GOLDEN / f"{name}.svg"))


if __name__ == "__main__":
    main()
