"""Pure information acquisition: pay an agent to buy a signal and reveal it.

The optimal limited-liability menu is a scaled cone of indicator contracts,

    G*(p) = alpha * max_w p(w) / p0(w),
    alpha = kappa / (E_S[max_w p_S(w) / p0(w)] - 1),

which depends on the signal only through its value of information.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .core import (
    ABS_TOL,
    Anchor,
    Menu,
    OutcomeSpace,
    Plan,
    ProblemInstance,
    SolveReport,
    as_belief,
    best_response_contract,
)
from .errors import MenuforgeError, TrivialInstanceError, ZeroMassError

IA_ACTION = "observe"


@dataclass(frozen=True)
class IAInstance:
    outcomes: OutcomeSpace
    signals: tuple[str, ...]
    posteriors: NDArray[np.float64]
    q: NDArray[np.float64]
    kappa: float

    def __post_init__(self):
        outcomes = self.outcomes if isinstance(self.outcomes, OutcomeSpace) else OutcomeSpace(tuple(self.outcomes))
        object.__setattr__(self, "outcomes", outcomes)
        signals = tuple(str(s) for s in self.signals)
        object.__setattr__(self, "signals", signals)
        post = np.array(self.posteriors, dtype=np.float64)
        if post.shape != (len(signals), len(outcomes)):
            raise MenuforgeError(f"posteriors have shape {post.shape}, expected {(len(signals), len(outcomes))}")
        for row in post:
            as_belief(row)
        post.flags.writeable = False
        object.__setattr__(self, "posteriors", post)
        object.__setattr__(self, "q", as_belief(self.q, size=len(signals)))
        if self.kappa < 0:
            raise MenuforgeError("acquisition cost must be non-negative")
        object.__setattr__(self, "kappa", float(self.kappa))
        if np.any(self.prior <= 0.0):
            zero = [outcomes.labels[i] for i in np.flatnonzero(self.prior <= 0.0)]
            raise ZeroMassError(f"prior has zero mass on outcomes {zero}; reduce the outcome space first")

    @classmethod
    def build(cls, posteriors: ArrayLike, q: ArrayLike, kappa: float, outcomes=None, signals=None) -> IAInstance:
        post = np.asarray(posteriors, dtype=np.float64)
        outcomes = outcomes or tuple(str(i) for i in range(post.shape[1]))
        signals = signals or tuple(f"s{i}" for i in range(post.shape[0]))
        return cls(OutcomeSpace(tuple(outcomes)), tuple(signals), post, q, kappa)

    @classmethod
    def from_problem(cls, inst: ProblemInstance) -> IAInstance:
        if len(inst.actions) != 1:
            raise MenuforgeError("information acquisition needs a single action")
        return cls(inst.outcomes, inst.signals, inst.conditionals[0], inst.q, inst.kappa)

    @property
    def prior(self) -> NDArray[np.float64]:
        return self.q @ self.posteriors

    def to_problem(self) -> ProblemInstance:
        return ProblemInstance(
            self.outcomes, self.signals, (IA_ACTION,), self.q, self.posteriors[None, :, :], [0.0], self.kappa
        )

    def plan(self) -> Plan:
        return Plan(True, {s: IA_ACTION for s in self.signals})


def check_nontrivial(inst: IAInstance, tol: float = ABS_TOL) -> bool:
    if inst.kappa <= 0:
        return False
    return bool(np.any(np.abs(inst.posteriors - inst.prior[None, :]) > tol))


def base_cone(p0: ArrayLike) -> Menu:
    """Pieces ``p -> p(w) / p0(w)``: each is 1 at the prior and 0 at the other corners."""
    p0 = as_belief(p0)
    if np.any(p0 <= 0.0):
        raise ZeroMassError("prior has an outcome with zero mass; reduce the outcome space first")
    slopes = np.diag(1.0 / p0)
    return Menu.from_arrays(slopes, np.zeros(p0.shape[0]))


def expected_value(menu: Menu, inst: IAInstance) -> float:
    return float(sum(qs * menu(ps) for qs, ps in zip(inst.q, inst.posteriors)))


def value_of_information(inst: IAInstance) -> float:
    ratios = inst.posteriors / inst.prior[None, :]
    return float(inst.q @ ratios.max(axis=1))


def _anchored(menu: Menu, inst: IAInstance) -> Menu:
    anchors = [Anchor(s, p, best_response_contract(menu, p)[0]) for s, p in zip(inst.signals, inst.posteriors)]
    anchors.append(Anchor("prior", inst.prior, 0))
    return Menu(menu.pieces, tuple(anchors))


def phi(menu: Menu, inst: IAInstance) -> Menu:
    """Rescale a feasible minimum-payment menu into the normalised problem."""
    denom = expected_value(menu, inst) - inst.kappa
    if not denom > 0:
        raise MenuforgeError(f"phi needs E[G(p_S)] - kappa > 0, got {denom:.12g}")
    return menu.scaled(1.0 / denom)


def phi_inverse(menu: Menu, inst: IAInstance) -> Menu:
    denom = expected_value(menu, inst) - 1.0
    if not denom > 0:
        raise MenuforgeError(f"phi_inverse needs E[G(p_S)] > 1, got E - 1 = {denom:.12g}")
    return menu.scaled(inst.kappa / denom)


def solve_ia(inst: IAInstance, certify: bool = True, tol: float = 1e-7) -> SolveReport:
    """Closed-form minimum expected payment menu for information acquisition.

    A zero acquisition cost is reported as trivial with the all-zero menu.
    An uninformative signal cannot be incentivised and raises.
    """
    if inst.kappa <= 0:
        zero = Menu.from_contracts([np.zeros(len(inst.outcomes))])
        report = SolveReport("ia", "trivial", _anchored(zero, inst), 0.0, flags=("trivial",),
                             reason="acquisition is free; the zero menu suffices")
        return _certify(report, inst, tol) if certify else report
    if not check_nontrivial(inst):
        raise TrivialInstanceError(
            "uninformative", "cannot incentivize acquisition: every posterior equals the prior")
    voi = value_of_information(inst)
    if voi - 1.0 <= ABS_TOL:
        raise TrivialInstanceError(
            "trivial-marginal", f"value of information {voi:.12g} is within tolerance of 1")
    alpha = inst.kappa / (voi - 1.0)
    menu = _anchored(base_cone(inst.prior).scaled(alpha), inst)
    report = SolveReport("ia", "optimal", menu, alpha * voi,
                         details={"alpha": alpha, "value_of_information": voi})
    return _certify(report, inst, tol) if certify else report


def _certify(report: SolveReport, inst: IAInstance, tol: float) -> SolveReport:
    from .verify import verify_menu

    cert = verify_menu(report.menu, inst.to_problem(), inst.plan(), tol)
    report.certificate = cert
    report.binding = cert.binding(tol)
    return report
