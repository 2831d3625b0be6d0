"""Hidden actions with limited liability, through the convexified cost curve.

The cost curve ``c(p)`` is the cheapest expected cost of any randomisation
over actions whose mixed outcome law is ``p``.  An action is elicitable iff
it sits on that curve, and an optimal single contract is a subtangent of the
curve at the action's belief, lifted just enough to pay non-negatively.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .core import (
    ABS_TOL,
    Anchor,
    Contract,
    Menu,
    OutcomeSpace,
    Plan,
    ProblemInstance,
    SolveReport,
    as_belief,
)
from .errors import MenuforgeError, NotElicitableError, OutsideHullError
from .lp import LinearProgram, LpStatus, solve_lp

ELICIT_RTOL = 1e-7
MARGINAL_FACTOR = 10.0
CONTRACT_SIGNAL = "*"


@dataclass(frozen=True)
class ContractInstance:
    outcomes: OutcomeSpace
    actions: tuple[str, ...]
    beliefs: NDArray[np.float64]
    costs: NDArray[np.float64]
    target: str

    def __post_init__(self):
        outcomes = self.outcomes if isinstance(self.outcomes, OutcomeSpace) else OutcomeSpace(tuple(self.outcomes))
        object.__setattr__(self, "outcomes", outcomes)
        actions = tuple(str(a) for a in self.actions)
        if len(set(actions)) != len(actions) or not actions:
            raise MenuforgeError(f"action labels must be unique and non-empty: {actions}")
        object.__setattr__(self, "actions", actions)
        beliefs = np.array(self.beliefs, dtype=np.float64)
        if beliefs.shape != (len(actions), len(outcomes)):
            raise MenuforgeError(f"beliefs have shape {beliefs.shape}, expected {(len(actions), len(outcomes))}")
        for row in beliefs:
            as_belief(row)
        beliefs.flags.writeable = False
        object.__setattr__(self, "beliefs", beliefs)
        costs = np.array(self.costs, dtype=np.float64)
        if costs.shape != (len(actions),) or np.any(costs < 0):
            raise MenuforgeError("costs must be one non-negative number per action")
        costs.flags.writeable = False
        object.__setattr__(self, "costs", costs)
        if self.target not in actions:
            raise MenuforgeError(f"target action {self.target!r} is not one of {actions}")

    @classmethod
    def build(cls, beliefs: ArrayLike, costs: ArrayLike, target: int | str, outcomes=None, actions=None):
        beliefs = np.asarray(beliefs, dtype=np.float64)
        actions = actions or tuple(f"a{i + 1}" for i in range(beliefs.shape[0]))
        outcomes = outcomes or tuple(str(i) for i in range(beliefs.shape[1]))
        if isinstance(target, (int, np.integer)):
            target = actions[target]
        return cls(OutcomeSpace(tuple(outcomes)), tuple(actions), beliefs, costs, target)

    @classmethod
    def from_problem(cls, inst: ProblemInstance, target: str) -> ContractInstance:
        if len(inst.signals) != 1:
            raise MenuforgeError("the hidden-action problem has a single (trivial) signal")
        return cls(inst.outcomes, inst.actions, inst.marginals, inst.costs, target)

    @property
    def target_index(self) -> int:
        return self.actions.index(self.target)

    @property
    def target_belief(self) -> NDArray[np.float64]:
        return self.beliefs[self.target_index]

    @property
    def target_cost(self) -> float:
        return float(self.costs[self.target_index])

    def retarget(self, target: str) -> ContractInstance:
        return ContractInstance(self.outcomes, self.actions, self.beliefs, self.costs, target)

    def to_problem(self) -> ProblemInstance:
        return ProblemInstance(self.outcomes, (CONTRACT_SIGNAL,), self.actions, [1.0],
                               self.beliefs[:, None, :], self.costs, 0.0)

    def plan(self) -> Plan:
        return Plan(True, {CONTRACT_SIGNAL: self.target})


def mixture_cost(beliefs: NDArray[np.float64], costs: NDArray[np.float64], p: ArrayLike) -> float | None:
    """``min lam . costs`` over mixtures ``lam`` of ``beliefs`` that equal ``p``;
    ``None`` when no mixture reaches ``p``."""
    p = np.asarray(p, dtype=np.float64)
    m, n = beliefs.shape
    lp = LinearProgram(np.asarray(costs, dtype=np.float64), "min", bounds=[(0.0, None)] * m)
    for w in range(n):
        lp.add_constraint(beliefs[:, w], "=", p[w], f"mix[{w}]")
    lp.add_constraint(np.ones(m), "=", 1.0, "simplex")
    out = solve_lp(lp)
    if out.status is LpStatus.INFEASIBLE:
        return None
    return out.value


def cost_curve_eval(inst: ContractInstance, p: ArrayLike) -> float:
    p = as_belief(p, size=len(inst.outcomes))
    value = mixture_cost(inst.beliefs, inst.costs, p)
    if value is None:
        raise OutsideHullError(f"belief {p.tolist()} is outside the hull of the action beliefs")
    return value


@dataclass(frozen=True)
class Elicitability:
    elicitable: bool
    curve_value: float
    gap: float
    marginal: bool


def elicitability(inst: ContractInstance) -> Elicitability:
    c_star = inst.target_cost
    curve = cost_curve_eval(inst, inst.target_belief)
    gap = c_star - curve
    tol = ELICIT_RTOL * (1.0 + c_star)
    marginal = tol / MARGINAL_FACTOR < abs(gap) <= tol * MARGINAL_FACTOR
    return Elicitability(bool(gap <= tol), curve, gap, bool(marginal))


def is_elicitable(inst: ContractInstance) -> bool:
    return elicitability(inst).elicitable


def _require_elicitable(inst: ContractInstance) -> Elicitability:
    e = elicitability(inst)
    if not e.elicitable:
        raise NotElicitableError(
            f"action {inst.target!r} is not on lower boundary of the cost hull: "
            f"c(p) = {e.curve_value:.12g} < cost {inst.target_cost:.12g}")
    return e


def shift_for(inst: ContractInstance, slope: ArrayLike) -> float:
    """Upward lift the subtangent with this slope needs to pay non-negatively."""
    v = np.asarray(slope, dtype=np.float64)
    lowest = inst.target_cost + float(v.min() - v @ inst.target_belief)
    return max(0.0, -lowest)


def subtangent_contract(inst: ContractInstance, slope: ArrayLike, shift: float) -> Contract:
    v = np.asarray(slope, dtype=np.float64)
    return Contract(inst.target_cost + (v - v @ inst.target_belief) + shift)


def in_subdifferential(inst: ContractInstance, slope: ArrayLike, tol: float = 1e-9) -> bool:
    """Whether the subtangent with this slope stays below every action's cost."""
    v = np.asarray(slope, dtype=np.float64)
    lhs = inst.target_cost + (inst.beliefs - inst.target_belief) @ v
    return bool(np.all(lhs <= inst.costs + tol * (1.0 + np.abs(inst.costs))))


def _normalise(v: NDArray[np.float64]) -> NDArray[np.float64]:
    v = v - v.min()
    v[np.abs(v) < 1e-13] = 0.0
    return v


@dataclass(frozen=True)
class ContractSolution:
    contract: Contract
    shift: float
    objective: float
    slope: NDArray[np.float64]
    raw_shift: float
    marginal: bool = False


def optimal_contract(inst: ContractInstance) -> ContractSolution:
    """Single optimal contract: the subtangent of the cost curve at the target
    whose lowest payment is largest, lifted to satisfy limited liability."""
    e = _require_elicitable(inst)
    n = len(inst.outcomes)
    p_star = inst.target_belief
    c_star = inst.target_cost
    # variables: v (n, free), z (free); maximise z <= v(w) - v . p*
    objective = np.zeros(n + 1)
    objective[n] = 1.0
    lp = LinearProgram(objective, "max")
    for w in range(n):
        row = np.zeros(n + 1)
        row[:n] = p_star
        row[w] -= 1.0
        row[n] = 1.0
        lp.add_constraint(row, "<=", 0.0, f"min_payment[{w}]")
    for a in range(len(inst.actions)):
        if a == inst.target_index:
            continue
        row = np.zeros(n + 1)
        row[:n] = inst.beliefs[a] - p_star
        lp.add_constraint(row, "<=", inst.costs[a] - c_star, f"subgradient[{inst.actions[a]}]")
    out = solve_lp(lp)
    if not out.optimal:
        raise NotElicitableError(f"subgradient LP for {inst.target!r} returned {out.status.value}")
    v = _normalise(out.x[:n])
    raw_shift = -(c_star + float(v.min() - v @ p_star))
    shift = max(0.0, raw_shift)
    t = subtangent_contract(inst, v, shift)
    return ContractSolution(t, shift, c_star + shift, v, raw_shift, e.marginal)


def enumerate_optimal_menu(inst: ContractInstance, candidates: Sequence[Contract | ArrayLike] = (),
                           slope: ArrayLike | None = None, tol: float = 1e-9) -> Menu:
    """Optimal single contract plus every candidate that keeps the menu optimal.

    A candidate survives iff it pays non-negatively and, lowered by the
    optimal shift, its expected payment stays weakly below every action's
    cost (hence below the whole cost curve).  ``slope`` optionally replaces
    the base subgradient when limited liability is slack; it must be a
    subgradient whose subtangent pays non-negatively.
    """
    sol = optimal_contract(inst)
    v, shift = sol.slope, sol.shift
    if slope is not None:
        if sol.raw_shift > 0:
            raise MenuforgeError("limited liability binds; the base subgradient cannot be replaced")
        v = np.asarray(slope, dtype=np.float64)
        if not in_subdifferential(inst, v, tol):
            raise MenuforgeError("slope is not a subgradient of the cost curve at the target")
        if shift_for(inst, v) > tol:
            raise MenuforgeError("slope gives a subtangent that violates limited liability")
    base = subtangent_contract(inst, v, shift)
    kept = [base]
    for t in candidates:
        t = t if isinstance(t, Contract) else Contract(t)
        if accepts_extra(inst, t, shift, tol):
            kept.append(t)
    menu = Menu.from_contracts(kept)
    return Menu(menu.pieces, (Anchor(inst.target, inst.target_belief, 0),))


def accepts_extra(inst: ContractInstance, t: Contract, shift: float, tol: float = 1e-9) -> bool:
    if len(t) != len(inst.outcomes):
        return False
    if t.payments.min() < -tol:
        return False
    lowered = inst.beliefs @ t.payments - shift
    return bool(np.all(lowered <= inst.costs + tol))


def subtangent_candidates(inst: ContractInstance) -> list[Contract]:
    """Unshifted subtangents of the cost curve at every elicitable action's belief."""
    out = []
    for a in inst.actions:
        other = inst.retarget(a)
        if not is_elicitable(other):
            continue
        v = optimal_contract(other).slope
        out.append(subtangent_contract(other, v, 0.0))
    return out


@dataclass(frozen=True)
class TargetChoice:
    action: str
    principal_utility: float
    solution: ContractSolution


def best_target(inst: ContractInstance, rewards: ArrayLike) -> TargetChoice:
    """Principal's favourite action: expected reward minus the optimal payment,
    over elicitable actions (ties go to the earlier action)."""
    rewards = np.asarray(rewards, dtype=np.float64)
    if rewards.shape != (len(inst.outcomes),):
        raise MenuforgeError(f"need one reward per outcome ({len(inst.outcomes)}), got {rewards.shape}")
    best = None
    for a in inst.actions:
        other = inst.retarget(a)
        if not is_elicitable(other):
            continue
        sol = optimal_contract(other)
        value = float(rewards @ other.target_belief) - sol.objective
        if best is None or value > best.principal_utility + ABS_TOL:
            best = TargetChoice(a, value, sol)
    if best is None:
        raise NotElicitableError("no action is elicitable")
    return best


def is_strictly_elicitable(inst: ContractInstance) -> bool:
    """Lower-vertex test: no mixture of the other actions reaches the target's
    belief at cost within tolerance of the target's."""
    if not is_elicitable(inst):
        return False
    others = [a for a in range(len(inst.actions)) if a != inst.target_index]
    if not others:
        return True
    value = mixture_cost(inst.beliefs[others], inst.costs[others], inst.target_belief)
    if value is None:
        return True
    c_star = inst.target_cost
    return bool(value - c_star > ELICIT_RTOL * (1.0 + c_star))


def slope_box(inst: ContractInstance) -> float:
    return 1.0 + 10.0 * (float(inst.costs.max() - inst.costs.min()) + 1.0)


@dataclass(frozen=True)
class StrictSlope:
    slope: NDArray[np.float64]
    margin: float


def strict_subgradient(inst: ContractInstance, tol: float = 1e-9) -> StrictSlope:
    """Subgradient maximising the smallest incentive margin over other actions."""
    if not is_strictly_elicitable(inst):
        raise NotElicitableError(f"action {inst.target!r} is not strictly elicitable at tolerance")
    n = len(inst.outcomes)
    p_star = inst.target_belief
    B = slope_box(inst)
    objective = np.zeros(n + 1)
    objective[n] = 1.0
    lp = LinearProgram(objective, "max", bounds=[(-B, B)] * n + [(None, B)])
    for a in range(len(inst.actions)):
        if a == inst.target_index or np.allclose(inst.beliefs[a], p_star, atol=1e-12, rtol=0):
            continue
        row = np.zeros(n + 1)
        row[:n] = inst.beliefs[a] - p_star
        row[n] = 1.0
        lp.add_constraint(row, "<=", inst.costs[a] - inst.target_cost, f"strict[{inst.actions[a]}]")
    out = solve_lp(lp)
    if not out.optimal or out.x[n] <= tol:
        raise NotElicitableError("not strictly elicitable at tolerance")
    return StrictSlope(_normalise(out.x[:n]), float(out.x[n]))


@dataclass(frozen=True)
class StrictSolution:
    contract: Contract
    objective: float
    weight: float
    optimum: float


def strict_epsilon_optimal(inst: ContractInstance, epsilon: float, slope: ArrayLike | None = None) -> StrictSolution:
    """Mix the optimal contract with a strictly incentivising subtangent so the
    cost exceeds the optimum by at most ``epsilon``."""
    if not epsilon > 0:
        raise MenuforgeError("epsilon must be positive")
    first = optimal_contract(inst)
    v2 = strict_subgradient(inst).slope if slope is None else np.asarray(slope, dtype=np.float64)
    beta2 = shift_for(inst, v2)
    t2 = subtangent_contract(inst, v2, beta2)
    gap = beta2 - first.shift
    alpha = 0.5 if gap <= 0 else min(0.5, epsilon / gap)
    t = Contract((1.0 - alpha) * first.contract.payments + alpha * t2.payments)
    return StrictSolution(t, float(t.payments @ inst.target_belief), alpha, first.objective)


def solve_contract(inst: ContractInstance, epsilon: float | None = None, certify: bool = True,
                   tol: float = 1e-7, enumerate_menu: bool = False) -> SolveReport:
    """Single optimal contract by default; ``epsilon`` switches to the strict variant and
    ``enumerate_menu`` widens the single contract to a screened optimal menu."""
    if epsilon is not None and enumerate_menu:
        raise MenuforgeError("strict mode and menu enumeration are exclusive")
    if epsilon is None:
        sol = optimal_contract(inst)
        t, objective = sol.contract, sol.objective
        details = {"shift": sol.shift, "slope": sol.slope.tolist()}
        flags = ("tolerance-marginal",) if sol.marginal else ()
    else:
        sol = strict_epsilon_optimal(inst, epsilon)
        t, objective = sol.contract, sol.objective
        details = {"weight": sol.weight, "optimum": sol.optimum, "epsilon": epsilon}
        flags = ("strict",)
    if enumerate_menu:
        menu = enumerate_optimal_menu(inst, subtangent_candidates(inst))
        details["candidates_kept"] = len(menu) - 1
    else:
        menu = Menu((t.to_piece(),), (Anchor(inst.target, inst.target_belief, 0),))
    report = SolveReport("contract", "optimal", menu, objective, flags=flags, details=details)
    if certify:
        from .verify import verify_menu

        report.certificate = verify_menu(menu, inst.to_problem(), inst.plan(), tol)
        report.binding = report.certificate.binding(tol)
    return report


def lower_hull_1d(xs: ArrayLike, ys: ArrayLike) -> list[tuple[float, float]]:
    """Lower convex envelope of planar points, left to right."""
    pts = sorted(set(zip(map(float, xs), map(float, ys))))
    # keep the cheapest point at each abscissa
    best: dict[float, float] = {}
    for x, y in pts:
        best[x] = min(y, best.get(x, np.inf))
    pts = sorted(best.items())
    hull: list[tuple[float, float]] = []
    for p in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1) <= ABS_TOL:
                hull.pop()
            else:
                break
        hull.append(p)
    return hull
