"""Independent certification of menus.

Everything here is exhaustive over the finite strategy space or solved as an
LP from scratch; nothing reuses a solver's own bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ABS_TOL, Menu, Plan, ProblemInstance, best_response_contract, min_payments, point_mass
from .errors import InfeasibleError, TrivialInstanceError
from .lp import LinearProgram, solve_lp

DEFAULT_TOL = 1e-7

INCENTIVE = "incentive"
PARTICIPATION = "participation"
LIMITED_LIABILITY = "limited_liability"
FAMILIES = (INCENTIVE, PARTICIPATION, LIMITED_LIABILITY)


@dataclass(frozen=True)
class DeviationStrategy:
    """``choices`` maps each signal to (action, contract index); without
    acquisition it holds the single entry under key ``None``."""

    acquire: bool
    choices: dict

    def describe(self) -> dict:
        if self.acquire:
            return {"acquire": True, "choices": {s: {"action": a, "contract": i} for s, (a, i) in self.choices.items()}}
        a, i = self.choices[None]
        return {"acquire": False, "action": a, "contract": i}


@dataclass(frozen=True)
class Slack:
    family: str
    label: str
    value: float


@dataclass
class Certificate:
    plan_utility: float
    best_deviation_utility: float
    best_deviation: DeviationStrategy
    slacks: list[Slack]
    tol: float
    strict_margin: float = float("inf")
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = all(s.value >= -self.tol for s in self.slacks)

    def passes(self, tol: float) -> bool:
        return all(s.value >= -tol for s in self.slacks)

    def failed_families(self) -> set[str]:
        return {s.family for s in self.slacks if s.value < -self.tol}

    def min_slack(self, family: str) -> float:
        values = [s.value for s in self.slacks if s.family == family and s.label != "best_response"]
        return min(values, default=float("inf"))

    def binding(self, tol: float | None = None) -> dict[str, bool]:
        tol = self.tol if tol is None else tol
        return {fam: bool(self.min_slack(fam) <= tol) for fam in FAMILIES}


def _utilities(menu: Menu, inst: ProblemInstance):
    cond = inst.conditionals
    A, S = cond.shape[:2]
    values = np.einsum("asw,kw->ask", cond, menu.slopes) - menu.intercepts[None, None, :]
    cond_util = values.max(axis=2) - inst.costs[:, None]
    noacq_values = inst.marginals @ menu.slopes.T - menu.intercepts[None, :]
    noacq_util = noacq_values.max(axis=1) - inst.costs
    return cond_util, noacq_util


def _collapsed(inst: ProblemInstance) -> bool:
    # with one free signal, skipping acquisition is the same behaviour as acquiring
    return len(inst.signals) == 1 and inst.kappa == 0.0


def agent_best_response(menu: Menu, inst: ProblemInstance) -> tuple[DeviationStrategy, float]:
    """Utility-maximising agent behaviour against ``menu`` (acquisition wins ties)."""
    cond_util, noacq_util = _utilities(menu, inst)
    per_signal = cond_util.argmax(axis=0)
    acq_util = float(inst.q @ cond_util.max(axis=0) - inst.kappa)
    choices = {}
    for s, a in enumerate(per_signal):
        piece = best_response_contract(menu, inst.conditionals[a, s])[0]
        choices[inst.signals[s]] = (inst.actions[a], piece)
    acquire = DeviationStrategy(True, choices)
    a0 = int(noacq_util.argmax())
    best_noacq = float(noacq_util[a0])
    if best_noacq > acq_util + ABS_TOL:
        piece = best_response_contract(menu, inst.marginals[a0])[0]
        return DeviationStrategy(False, {None: (inst.actions[a0], piece)}), best_noacq
    return acquire, acq_util


def strategy_utility(menu: Menu, inst: ProblemInstance, strategy: DeviationStrategy) -> float:
    """Utility of a fully specified strategy, contract choices included."""
    if strategy.acquire:
        total = -inst.kappa
        for s, label in enumerate(inst.signals):
            a_label, piece = strategy.choices[label]
            a = inst.action_index(a_label)
            total += inst.q[s] * (menu.pieces[piece](inst.conditionals[a, s]) - inst.costs[a])
        return float(total)
    a_label, piece = strategy.choices[None]
    a = inst.action_index(a_label)
    return float(menu.pieces[piece](inst.marginals[a]) - inst.costs[a])


def plan_utility(menu: Menu, inst: ProblemInstance, plan: Plan) -> float:
    acts = plan.action_indices(inst)
    if plan.acquire:
        return float(sum(inst.q[s] * (menu(inst.conditionals[a, s]) - inst.costs[a]) for s, a in enumerate(acts))
                     - inst.kappa)
    a = acts[0]
    return float(menu(inst.marginals[a]) - inst.costs[a])


def verify_menu(menu: Menu, inst: ProblemInstance, plan: Plan, tol: float = DEFAULT_TOL) -> Certificate:
    if menu.n_outcomes != inst.n_outcomes:
        from .errors import DimensionMismatchError

        raise DimensionMismatchError("menu vs instance outcomes", inst.n_outcomes, menu.n_outcomes)
    acts = plan.action_indices(inst)
    u_plan = plan_utility(menu, inst, plan)
    best, u_best = agent_best_response(menu, inst)
    cond_util, noacq_util = _utilities(menu, inst)

    slacks = [Slack(INCENTIVE, "best_response", u_plan - u_best)]
    deviation_gaps = []
    if plan.acquire:
        if not _collapsed(inst):
            for a, label in enumerate(inst.actions):
                gap = u_plan - float(noacq_util[a])
                slacks.append(Slack(INCENTIVE, f"no_acquire[{label}]", gap))
                deviation_gaps.append(gap)
        losses = []
        for s, sig in enumerate(inst.signals):
            f = acts[s]
            others = []
            for a, label in enumerate(inst.actions):
                if a == f:
                    continue
                gap = float(cond_util[f, s] - cond_util[a, s])
                slacks.append(Slack(INCENTIVE, f"conditional[{sig},{label}]", gap))
                others.append(inst.q[s] * gap)
            losses.append(min(others, default=float("inf")))
        if losses and any(np.isfinite(losses)):
            losses = np.array(losses)
            if np.any(losses <= 0):
                deviation_gaps.append(float(np.minimum(losses, 0.0).sum()))
            else:
                deviation_gaps.append(float(losses.min()))
    else:
        a_star = acts[0]
        for a, label in enumerate(inst.actions):
            if a != a_star:
                gap = u_plan - float(noacq_util[a])
                slacks.append(Slack(INCENTIVE, f"no_acquire[{label}]", gap))
                deviation_gaps.append(gap)
        if not _collapsed(inst):
            gap = u_plan - float(inst.q @ cond_util.max(axis=0) - inst.kappa)
            slacks.append(Slack(INCENTIVE, "acquire", gap))
            deviation_gaps.append(gap)

    slacks.append(Slack(PARTICIPATION, "participation", u_plan))
    for w, m in zip(inst.outcomes.labels, min_payments(menu)):
        slacks.append(Slack(LIMITED_LIABILITY, f"min_payment[{w}]", float(m)))
    margin = min(deviation_gaps, default=float("inf"))
    return Certificate(u_plan, u_best, best, slacks, tol, margin)


def ia_lp_oracle(inst, dense: bool = False) -> float:
    """Minimum expected payment for information acquisition, by brute LP.

    One affine piece is anchored at each posterior and at the prior (and at
    every simplex corner when ``dense``); the LP searches all such menus.
    """
    from .ia import check_nontrivial

    if not check_nontrivial(inst):
        raise TrivialInstanceError("trivial", "oracle needs a nontrivial instance")
    n = len(inst.outcomes)
    anchors = [np.asarray(p) for p in inst.posteriors] + [inst.prior]
    if dense:
        anchors += [point_mass(n, w) for w in range(n)]
    k = len(anchors)
    width = n + 1

    def h(j, p):
        row = np.zeros(k * width)
        row[j * width:j * width + n] = p
        row[j * width + n] = -1.0
        return row

    S = len(inst.signals)
    expected = sum(inst.q[s] * h(s, anchors[s]) for s in range(S))
    # free slopes and intercepts, with limited liability as explicit rows
    lp = LinearProgram(expected, "min")
    for j in range(k):
        lp.add_constraint(expected - h(j, inst.prior), ">=", inst.kappa, f"incentive[{j}]")
        for w in range(n):
            lp.add_constraint(h(j, point_mass(n, w)), ">=", 0.0, f"ll[{j},{w}]")
    for i in range(k):
        for j in range(k):
            if i != j:
                lp.add_constraint(h(i, anchors[i]) - h(j, anchors[i]), ">=", 0.0, f"convex[{i},{j}]")
    out = solve_lp(lp)
    if not out.optimal:
        raise InfeasibleError(f"information-acquisition oracle LP returned {out.status.value}")
    return out.value


@dataclass(frozen=True)
class ProbeResult:
    passed: bool
    trials: int
    worst_excess: float


def cost_curve_property_probe(inst, trials: int = 1000, rng=None, tol: float = DEFAULT_TOL) -> ProbeResult:
    """Random action mixtures never cost less than the curve at their mixed belief."""
    from .contracts import cost_curve_eval

    rng = np.random.default_rng(rng)
    worst = -np.inf
    m = len(inst.actions)
    for _ in range(trials):
        lam = rng.dirichlet(np.ones(m))
        p = lam @ inst.beliefs
        p = p / p.sum()
        excess = cost_curve_eval(inst, p) - float(lam @ inst.costs)
        worst = max(worst, excess)
    return ProbeResult(bool(worst <= tol), trials, float(worst))
