"""Contracts with information acquisition: linear programs over affine pieces.

Only the menu's values at finitely many beliefs matter, so it is enough to
search over one affine piece ``h(p) = x . p - y`` per relevant belief.  The
full program keeps a piece for every (action, signal) pair plus one per
action for an agent who skipped the signal; the reduced one keeps only the
piece each signal's planned action selects.  Both are solved and must agree.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .core import Anchor, Menu, Plan, ProblemInstance, SolveReport, as_belief
from .errors import MenuforgeError, OutsideHullError
from .lp import LinearProgram, LpStatus, solve_lp

NO_SIGNAL = "⊥"


def conditional_cost_curve(inst: ProblemInstance, signal: str | int, p: ArrayLike) -> float:
    from .contracts import mixture_cost

    s = signal if isinstance(signal, (int, np.integer)) else inst.signal_index(signal)
    p = as_belief(p, size=inst.n_outcomes)
    value = mixture_cost(inst.conditionals[:, s, :], inst.costs, p)
    if value is None:
        raise OutsideHullError(f"belief {p.tolist()} is outside the hull for signal {inst.signals[s]!r}")
    return value


def plan_precheck(inst: ProblemInstance, plan: Plan, rtol: float = 1e-7) -> dict[str, bool]:
    """Per signal: is the planned action on that signal's cost curve?  Any
    ``False`` rules the plan out."""
    acts = plan.action_indices(inst)
    report = {}
    for s, a in enumerate(acts):
        c = float(inst.costs[a])
        curve = conditional_cost_curve(inst, s, inst.conditionals[a, s])
        report[inst.signals[s]] = bool(c - curve <= rtol * (1.0 + c))
    return report


@dataclass
class GeneralLpSolution:
    status: LpStatus
    formulation: str
    keys: list[str]
    anchors: list[NDArray[np.float64]]
    objective: float | None = None
    slopes: NDArray[np.float64] | None = None
    intercepts: NDArray[np.float64] | None = None
    tight: dict[str, bool] = field(default_factory=dict)
    n_rows: int = 0
    menu: Menu | None = None

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL

    @property
    def n_pieces(self) -> int:
        return len(self.keys)

    @property
    def n_parameter_blocks(self) -> int:
        """Slope vectors plus intercepts, counted one block each."""
        return 2 * len(self.keys)


class _PieceLp:
    """Variable layout: piece ``j`` owns slope ``x_j`` (n entries) then ``y_j``.

    On beliefs only ``x - y`` matters, so the intercept is pinned at 0 and the
    slope is the contract itself; limited liability is then the bound ``x >= 0``.
    """

    def __init__(self, n_pieces: int, n_outcomes: int):
        self.n = n_outcomes
        self.k = n_pieces
        self.width = n_outcomes + 1

    def bounds(self) -> list[tuple[float | None, float | None]]:
        return ([(0.0, None)] * self.n + [(0.0, 0.0)]) * self.k

    def program(self, objective: NDArray[np.float64]) -> LinearProgram:
        return LinearProgram(objective, "min", bounds=self.bounds())

    def h(self, j: int, p: ArrayLike) -> NDArray[np.float64]:
        row = np.zeros(self.k * self.width)
        row[j * self.width:j * self.width + self.n] = p
        row[j * self.width + self.n] = -1.0
        return row

    def unpack(self, x: NDArray[np.float64]):
        block = x.reshape(self.k, self.width)
        return block[:, :self.n].copy(), block[:, self.n].copy()


def _finish(lp: LinearProgram, layout: _PieceLp, sol: GeneralLpSolution, designated: dict[str, int],
            outcome_labels: tuple[str, ...], tight_tol: float = 1e-7) -> GeneralLpSolution:
    out = solve_lp(lp)
    sol.status = out.status
    sol.n_rows = len(lp.rows)
    if out.status is LpStatus.UNBOUNDED:
        raise MenuforgeError("minimum-payment LP reported unbounded; limited liability should bound it")
    if not out.optimal:
        return sol
    slopes, intercepts = layout.unpack(out.x)
    sol.objective = out.value
    sol.slopes, sol.intercepts = slopes, intercepts
    slack = lp.slacks(out.x)
    sol.tight = {label: bool(v <= tight_tol) for label, v in zip(lp.labels, slack)}
    for j, key in enumerate(sol.keys):
        for w, label in enumerate(outcome_labels):
            sol.tight[f"limited_liability[{key},{label}]"] = bool(slopes[j, w] - intercepts[j] <= tight_tol)
    anchors = tuple(Anchor(label, sol.anchors[j], j) for label, j in designated.items())
    sol.menu = Menu.from_arrays(slopes, intercepts, anchors)
    return sol


def solve_general_p6(inst: ProblemInstance, plan: Plan) -> GeneralLpSolution:
    """Reduced program: one piece per signal, anchored at the planned belief."""
    if not plan.acquire:
        raise MenuforgeError("the general program targets plans that acquire the signal")
    acts = plan.action_indices(inst)
    S, n = len(inst.signals), inst.n_outcomes
    P = [inst.conditionals[acts[s], s] for s in range(S)]
    L = _PieceLp(S, n)
    planned_cost = float(sum(inst.q[s] * inst.costs[acts[s]] for s in range(S)))
    expected = sum(inst.q[s] * L.h(s, P[s]) for s in range(S))
    lp = L.program(expected)
    for s2 in range(S):
        for a, a_label in enumerate(inst.actions):
            lp.add_constraint(expected - L.h(s2, inst.marginals[a]), ">=",
                              inst.kappa + planned_cost - inst.costs[a],
                              f"no_acquire[{inst.signals[s2]},{a_label}]")
    for s in range(S):
        for s2 in range(S):
            for a, a_label in enumerate(inst.actions):
                lp.add_constraint(L.h(s, P[s]) - L.h(s2, inst.conditionals[a, s]), ">=",
                                  inst.costs[acts[s]] - inst.costs[a],
                                  f"conditional[{inst.signals[s]},{inst.signals[s2]},{a_label}]")
    lp.add_constraint(expected, ">=", inst.kappa + planned_cost, "participation")
    for s in range(S):
        for s2 in range(S):
            if s2 != s:
                lp.add_constraint(L.h(s, P[s]) - L.h(s2, P[s]), ">=", 0.0,
                                  f"convex[{inst.signals[s]},{inst.signals[s2]}]")
    sol = GeneralLpSolution(LpStatus.INFEASIBLE, "p6", list(inst.signals), P)
    return _finish(lp, L, sol, {sig: s for s, sig in enumerate(inst.signals)}, inst.outcomes.labels)


def solve_general_p5(inst: ProblemInstance, plan: Plan) -> GeneralLpSolution:
    """Full program: a piece for every action under every signal and under no signal."""
    if not plan.acquire:
        raise MenuforgeError("the general program targets plans that acquire the signal")
    acts = plan.action_indices(inst)
    A, S, n = len(inst.actions), len(inst.signals), inst.n_outcomes
    ext_signals = list(inst.signals) + [NO_SIGNAL]
    keys, beliefs = [], []
    for a in range(A):
        for s in range(S + 1):
            keys.append(f"{inst.actions[a]}|{ext_signals[s]}")
            beliefs.append(inst.conditionals[a, s] if s < S else inst.marginals[a])

    def idx(a: int, s: int) -> int:
        return a * (S + 1) + s

    L = _PieceLp(len(keys), n)
    planned_cost = float(sum(inst.q[s] * inst.costs[acts[s]] for s in range(S)))
    own = [L.h(j, beliefs[j]) for j in range(len(keys))]
    expected = sum(inst.q[s] * own[idx(acts[s], s)] for s in range(S))
    lp = L.program(expected)
    for a, a_label in enumerate(inst.actions):
        lp.add_constraint(expected - own[idx(a, S)], ">=", inst.kappa + planned_cost - inst.costs[a],
                          f"no_acquire[{a_label}]")
    for a, a_label in enumerate(inst.actions):
        for s in range(S):
            lp.add_constraint(own[idx(acts[s], s)] - own[idx(a, s)], ">=", inst.costs[acts[s]] - inst.costs[a],
                              f"conditional[{inst.signals[s]},{a_label}]")
    lp.add_constraint(expected, ">=", inst.kappa + planned_cost, "participation")
    for i, key in enumerate(keys):
        for j, other in enumerate(keys):
            if i != j:
                lp.add_constraint(own[i] - L.h(j, beliefs[i]), ">=", 0.0, f"convex[{key},{other}]")
    sol = GeneralLpSolution(LpStatus.INFEASIBLE, "p5", keys, beliefs)
    return _finish(lp, L, sol, {key: j for j, key in enumerate(keys)}, inst.outcomes.labels)


def solve_general(inst: ProblemInstance, plan: Plan, formulation: str = "p6", certify: bool = True,
                  tol: float = 1e-7) -> SolveReport:
    solver = {"p5": solve_general_p5, "p6": solve_general_p6}.get(formulation)
    if solver is None:
        raise MenuforgeError(f"unknown formulation {formulation!r}; use p5 or p6")
    sol = solver(inst, plan)
    if not sol.optimal:
        pre = plan_precheck(inst, plan)
        failing = [s for s, ok in pre.items() if not ok]
        reason = "plan not elicitable"
        if failing:
            reason += f": planned action is off the conditional cost curve for signals {failing}"
        return SolveReport("general", "infeasible", None, None, reason=reason,
                           details={"formulation": formulation, "precheck": pre})
    report = SolveReport("general", "optimal", sol.menu, sol.objective,
                         details={"formulation": formulation, "pieces": sol.n_pieces})
    if certify:
        from .verify import verify_menu

        report.certificate = verify_menu(sol.menu, inst, plan, tol)
        report.binding = report.certificate.binding(tol)
    return report
