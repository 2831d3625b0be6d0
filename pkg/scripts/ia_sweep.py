"""Sweep signal informativeness for pure information acquisition.

A binary state with prior (p0, 1 - p0) is revealed by a symmetric signal of
accuracy r.  For each r the script reports the value of information, the
closed-form scale alpha, the minimum expected payment, and the LP oracle's
value.  Output is CSV on stdout.

    python scripts/ia_sweep.py --kappa 0.1 --prior 0.5 --steps 20
"""

import argparse
import csv
import sys

import numpy as np

from menuforge.errors import TrivialInstanceError
from menuforge.ia import IAInstance, solve_ia
from menuforge.verify import ia_lp_oracle


def symmetric_signal(p0: float, accuracy: float) -> IAInstance | None:
    """Signals s in {lo, hi} with P(s = state) = accuracy; None if degenerate."""
    joint = np.array([[accuracy * p0, (1 - accuracy) * (1 - p0)],
                      [(1 - accuracy) * p0, accuracy * (1 - p0)]])  # rows: signal, cols: state
    q = joint.sum(axis=1)
    if np.any(q <= 0):
        return None
    return IAInstance.build(joint / q[:, None], q, 0.0, outcomes=("s0", "s1"), signals=("lo", "hi"))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--kappa", type=float, default=0.1)
    ap.add_argument("--prior", type=float, default=0.5, help="probability of the first state")
    ap.add_argument("--steps", type=int, default=20)
    args = ap.parse_args()

    out = csv.writer(sys.stdout)
    out.writerow(["accuracy", "value_of_information", "alpha", "objective", "oracle", "abs_gap"])
    for r in np.linspace(0.5, 1.0, args.steps + 1)[1:]:
        base = symmetric_signal(args.prior, float(r))
        if base is None:
            continue
        inst = IAInstance(base.outcomes, base.signals, base.posteriors, base.q, args.kappa)
        try:
            report = solve_ia(inst, certify=False)
        except TrivialInstanceError as exc:
            out.writerow([f"{r:.4f}", "", "", exc.reason, "", ""])
            continue
        oracle = ia_lp_oracle(inst)
        out.writerow([f"{r:.4f}", f"{report.details['value_of_information']:.9f}", f"{report.details['alpha']:.9f}",
                      f"{report.objective:.9f}", f"{oracle:.9f}", f"{abs(report.objective - oracle):.2e}"])


if __name__ == "__main__":
    main()
