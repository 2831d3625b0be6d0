"""Television producer example: a studio pays a producer to research the audience
(signal w or m) and then pick a show (a: ambitious, b: safe).

Solves every acquiring plan with both LP formulations and prints the minimum
expected payment for each, alongside the menu for the cheapest feasible plan.

    python scripts/tv_producer.py [--kappa 0.05]
"""

import argparse
import itertools
from pathlib import Path

from menuforge.cli import load_instance
from menuforge.core import Plan, ProblemInstance
from menuforge.general import plan_precheck, solve_general

FIXTURE = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "tv_producer.json"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--kappa", type=float, default=None, help="override the research cost")
    ap.add_argument("--instance", default=str(FIXTURE))
    args = ap.parse_args()

    inst = load_instance(args.instance).problem
    if args.kappa is not None:
        inst = ProblemInstance(inst.outcomes, inst.signals, inst.actions, inst.q, inst.conditionals, inst.costs,
                               args.kappa)

    print(f"kappa = {inst.kappa:g}, costs = {dict(zip(inst.actions, inst.costs.tolist()))}")
    print(f"{'plan':<16}{'precheck':<10}{'full':>12}{'reduced':>12}")
    best = None
    for combo in itertools.product(inst.actions, repeat=len(inst.signals)):
        plan = Plan(True, dict(zip(inst.signals, combo)))
        label = ",".join(f"{s}->{a}" for s, a in zip(inst.signals, combo))
        ok = all(plan_precheck(inst, plan).values())
        r5 = solve_general(inst, plan, "p5")
        r6 = solve_general(inst, plan, "p6")
        fmt = lambda r: f"{r.objective:.6f}" if r.objective is not None else r.status
        print(f"{label:<16}{str(ok):<10}{fmt(r5):>12}{fmt(r6):>12}")
        if r6.objective is not None and (best is None or r6.objective < best[1].objective):
            best = (label, r6)

    if best is None:
        print("\nno acquiring plan is implementable")
        return
    label, report = best
    print(f"\ncheapest plan {label}: expected payment {report.objective:.6f}")
    for h in report.menu.pieces:
        t = h.to_contract().payments
        print("  contract", dict(zip(inst.outcomes.labels, [round(float(v), 6) for v in t])))
    cert = report.certificate
    print(f"  certificate passed={cert.passed}, binding={report.binding}")


if __name__ == "__main__":
    main()
