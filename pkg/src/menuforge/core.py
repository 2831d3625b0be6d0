"""Simplex geometry, contracts, menus and the problem-instance data model.

A menu of contracts is represented by the convex function it induces,

    G(p) = max_i  x_i . p - y_i,

one affine piece per contract.  The contract paid by piece ``i`` at outcome
``w`` is the piece evaluated at the point mass on ``w``, i.e. ``x_i[w] - y_i``.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import (
    DimensionMismatchError,
    EmptyMenuError,
    InvalidBeliefError,
    MenuforgeError,
    ZeroMassError,
)

ABS_TOL = 1e-9
REL_TOL = 1e-7

Belief = NDArray[np.float64]


def is_close(a: float, b: float, abs_tol: float = ABS_TOL, rel_tol: float = REL_TOL) -> bool:
    return math.isclose(a, b, rel_tol=rel_tol, abs_tol=abs_tol)


def _frozen(values: ArrayLike, ndim: int | None = None) -> NDArray[np.float64]:
    arr = np.array(values, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise MenuforgeError(f"expected a {ndim}-dimensional array, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


def as_belief(weights: ArrayLike, size: int | None = None, tol: float = ABS_TOL) -> Belief:
    """Validate ``weights`` as a probability vector and return a read-only copy."""
    p = _frozen(weights, ndim=1)
    if size is not None and p.shape[0] != size:
        raise DimensionMismatchError("belief", size, p.shape[0])
    if not np.all(np.isfinite(p)):
        raise InvalidBeliefError("belief has non-finite entries")
    if np.any(p < -tol):
        raise InvalidBeliefError(f"belief has negative entries: {p.tolist()}")
    if abs(p.sum() - 1.0) > tol:
        raise InvalidBeliefError(f"belief sums to {p.sum():.12g}, not 1")
    return p


def point_mass(n: int, index: int) -> Belief:
    p = np.zeros(n)
    p[index] = 1.0
    p.flags.writeable = False
    return p


@dataclass(frozen=True)
class OutcomeSpace:
    labels: tuple[str, ...]

    def __post_init__(self):
        labels = tuple(str(x) for x in self.labels)
        if len(labels) < 2:
            raise MenuforgeError("an outcome space needs at least two outcomes")
        if any(not x for x in labels):
            raise MenuforgeError("outcome labels must be non-empty")
        if len(set(labels)) != len(labels):
            raise MenuforgeError(f"outcome labels are not unique: {labels}")
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise MenuforgeError(f"unknown outcome {label!r}") from None


@dataclass(frozen=True)
class Contract:
    """Payment per outcome."""

    payments: NDArray[np.float64]

    def __post_init__(self):
        t = _frozen(self.payments, ndim=1)
        if not np.all(np.isfinite(t)):
            raise MenuforgeError("contract payments must be finite")
        object.__setattr__(self, "payments", t)

    def __len__(self) -> int:
        return self.payments.shape[0]

    @property
    def limited_liability(self) -> bool:
        return bool(np.all(self.payments >= 0.0))

    def to_piece(self) -> AffinePiece:
        return AffinePiece(self.payments, 0.0)


@dataclass(frozen=True)
class AffinePiece:
    """The affine function ``p -> slope . p - intercept`` on the simplex."""

    slope: NDArray[np.float64]
    intercept: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "slope", _frozen(self.slope, ndim=1))
        object.__setattr__(self, "intercept", float(self.intercept))

    def __call__(self, p: ArrayLike) -> float:
        p = np.asarray(p, dtype=np.float64)
        if p.shape != self.slope.shape:
            raise DimensionMismatchError("belief vs piece", self.slope.shape[0], p.shape[0])
        return float(self.slope @ p - self.intercept)

    def to_contract(self) -> Contract:
        return Contract(self.slope - self.intercept)


@dataclass(frozen=True)
class Anchor:
    """A belief at which a solver designates a particular piece as the subtangent."""

    label: str
    belief: NDArray[np.float64]
    index: int

    def __post_init__(self):
        object.__setattr__(self, "belief", _frozen(self.belief, ndim=1))


@dataclass(frozen=True)
class Menu:
    """Finite menu of contracts, read as the max of its affine pieces."""

    pieces: tuple[AffinePiece, ...]
    anchors: tuple[Anchor, ...] = ()

    def __post_init__(self):
        pieces = tuple(self.pieces)
        if not pieces:
            raise EmptyMenuError("a menu needs at least one piece")
        n = pieces[0].slope.shape[0]
        for piece in pieces:
            if piece.slope.shape[0] != n:
                raise DimensionMismatchError("menu piece", n, piece.slope.shape[0])
        object.__setattr__(self, "pieces", pieces)
        object.__setattr__(self, "anchors", tuple(self.anchors))
        for anchor in self.anchors:
            if not 0 <= anchor.index < len(pieces):
                raise MenuforgeError(f"anchor {anchor.label!r} names missing piece {anchor.index}")

    @classmethod
    def from_arrays(cls, slopes: ArrayLike, intercepts: ArrayLike, anchors=()) -> Menu:
        slopes = np.atleast_2d(np.asarray(slopes, dtype=np.float64))
        intercepts = np.asarray(intercepts, dtype=np.float64).reshape(-1)
        return cls(tuple(AffinePiece(x, y) for x, y in zip(slopes, intercepts)), anchors)

    @classmethod
    def from_contracts(cls, contracts: Sequence[Contract | ArrayLike], anchors=()) -> Menu:
        pieces = []
        for t in contracts:
            t = t if isinstance(t, Contract) else Contract(t)
            pieces.append(t.to_piece())
        return cls(tuple(pieces), anchors)

    def __len__(self) -> int:
        return len(self.pieces)

    @property
    def n_outcomes(self) -> int:
        return self.pieces[0].slope.shape[0]

    @property
    def slopes(self) -> NDArray[np.float64]:
        return np.stack([h.slope for h in self.pieces])

    @property
    def intercepts(self) -> NDArray[np.float64]:
        return np.array([h.intercept for h in self.pieces])

    def contracts(self) -> list[Contract]:
        return [h.to_contract() for h in self.pieces]

    def payment_matrix(self) -> NDArray[np.float64]:
        """Row ``i`` holds the contract induced by piece ``i``."""
        return self.slopes - self.intercepts[:, None]

    def piece_values(self, p: ArrayLike) -> NDArray[np.float64]:
        p = np.asarray(p, dtype=np.float64)
        if p.ndim != 1 or p.shape[0] != self.n_outcomes:
            raise DimensionMismatchError("belief vs menu", self.n_outcomes, p.shape[-1] if p.ndim else 1)
        return self.slopes @ p - self.intercepts

    def __call__(self, p: ArrayLike) -> float:
        return menu_eval(self, p)

    def scaled(self, factor: float) -> Menu:
        return Menu.from_arrays(self.slopes * factor, self.intercepts * factor, self.anchors)

    def designated(self, label: str) -> int:
        for anchor in self.anchors:
            if anchor.label == label:
                return anchor.index
        raise KeyError(label)

    def designation_gaps(self) -> dict[str, float]:
        """``G(anchor) - h_designated(anchor)`` for every anchor; zero when consistent."""
        return {a.label: menu_eval(self, a.belief) - self.pieces[a.index](a.belief) for a in self.anchors}


def expected_payment(t: Contract | ArrayLike, p: ArrayLike) -> float:
    payments = t.payments if isinstance(t, Contract) else np.asarray(t, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if payments.shape != p.shape:
        raise DimensionMismatchError("contract vs belief", payments.shape[0], p.shape[0])
    return float(payments @ p)


def menu_eval(menu: Menu, p: ArrayLike) -> float:
    return float(np.max(menu.piece_values(p)))


def best_response_contract(menu: Menu, p: ArrayLike, tol: float = ABS_TOL) -> list[int]:
    """Indices of every piece attaining the menu's value at ``p``, lowest first."""
    values = menu.piece_values(p)
    top = values.max()
    return [int(i) for i in np.flatnonzero(values >= top - tol * max(1.0, abs(top)))]


def min_payment(menu: Menu, outcome: int) -> float:
    """Smallest payment any contract of the menu makes at ``outcome``."""
    n = menu.n_outcomes
    if not 0 <= outcome < n:
        raise MenuforgeError(f"outcome index {outcome} outside 0..{n - 1}")
    return float(menu.payment_matrix()[:, outcome].min())


def min_payments(menu: Menu) -> NDArray[np.float64]:
    return menu.payment_matrix().min(axis=0)


@dataclass(frozen=True)
class PriorDecomposition:
    outcome: int
    weight: float
    corner_weights: dict[int, float]


def prior_decomposition(p: ArrayLike, p0: ArrayLike) -> PriorDecomposition:
    """Write ``p0`` as ``weight * p`` plus point masses on every outcome but one.

    The left-out outcome maximises ``p / p0`` (lowest index on ties), which
    makes ``weight = p0[w] / p[w]`` lie in (0, 1] and all corner weights
    non-negative.
    """
    p = as_belief(p)
    p0 = as_belief(p0, size=p.shape[0])
    if np.any(p0 <= 0.0):
        zero = np.flatnonzero(p0 <= 0.0).tolist()
        raise ZeroMassError(f"prior has zero mass on outcomes {zero}; reduce the outcome space first")
    ratios = p / p0
    w = int(np.argmax(ratios))
    weight = float(p0[w] / p[w])
    corners = {j: float(p0[j] - weight * p[j]) for j in range(p.shape[0]) if j != w}
    # clip tiny negative round-off
    corners = {j: (0.0 if -ABS_TOL < v < 0.0 else v) for j, v in corners.items()}
    return PriorDecomposition(w, weight, corners)


@dataclass(frozen=True)
class ProblemInstance:
    """Outcomes, signals, actions, signal law, conditional outcome laws and costs.

    ``conditionals[a, s]`` is the outcome distribution when action ``a`` is
    taken and the signal realisation is ``s``.
    """

    outcomes: OutcomeSpace
    signals: tuple[str, ...]
    actions: tuple[str, ...]
    q: NDArray[np.float64]
    conditionals: NDArray[np.float64]
    costs: NDArray[np.float64]
    kappa: float = 0.0

    def __post_init__(self):
        outcomes = self.outcomes if isinstance(self.outcomes, OutcomeSpace) else OutcomeSpace(tuple(self.outcomes))
        object.__setattr__(self, "outcomes", outcomes)
        signals = tuple(str(s) for s in self.signals)
        actions = tuple(str(a) for a in self.actions)
        for name, labels in (("signal", signals), ("action", actions)):
            if not labels:
                raise MenuforgeError(f"at least one {name} is required")
            if len(set(labels)) != len(labels):
                raise MenuforgeError(f"{name} labels are not unique: {labels}")
        object.__setattr__(self, "signals", signals)
        object.__setattr__(self, "actions", actions)
        q = as_belief(self.q, size=len(signals))
        object.__setattr__(self, "q", q)
        cond = np.array(self.conditionals, dtype=np.float64)
        expected_shape = (len(actions), len(signals), len(outcomes))
        if cond.shape != expected_shape:
            raise MenuforgeError(f"conditionals have shape {cond.shape}, expected {expected_shape}")
        for a in range(cond.shape[0]):
            for s in range(cond.shape[1]):
                as_belief(cond[a, s])
        cond.flags.writeable = False
        object.__setattr__(self, "conditionals", cond)
        costs = _frozen(self.costs, ndim=1)
        if costs.shape[0] != len(actions):
            raise DimensionMismatchError("costs", len(actions), costs.shape[0])
        if np.any(costs < 0) or not np.all(np.isfinite(costs)):
            raise MenuforgeError("action costs must be finite and non-negative")
        object.__setattr__(self, "costs", costs)
        kappa = float(self.kappa)
        if not (kappa >= 0 and math.isfinite(kappa)):
            raise MenuforgeError("acquisition cost must be finite and non-negative")
        object.__setattr__(self, "kappa", kappa)

    @property
    def n_outcomes(self) -> int:
        return len(self.outcomes)

    @property
    def marginals(self) -> NDArray[np.float64]:
        """Outcome law of each action for an agent who skipped the signal."""
        return np.einsum("s,asw->aw", self.q, self.conditionals)

    def action_index(self, label: str) -> int:
        try:
            return self.actions.index(label)
        except ValueError:
            raise MenuforgeError(f"unknown action {label!r}") from None

    def signal_index(self, label: str) -> int:
        try:
            return self.signals.index(label)
        except ValueError:
            raise MenuforgeError(f"unknown signal {label!r}") from None


@dataclass(frozen=True)
class Plan:
    """Acquire (or not) and then act; ``assignment`` maps signal to action."""

    acquire: bool
    assignment: Mapping[str, str] = field(default_factory=dict)
    action: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "assignment", dict(self.assignment))

    def validate(self, inst: ProblemInstance) -> None:
        if self.acquire:
            missing = [s for s in inst.signals if s not in self.assignment]
            if missing:
                raise MenuforgeError(f"plan assigns no action to signals {missing}")
            extra = [s for s in self.assignment if s not in inst.signals]
            if extra:
                raise MenuforgeError(f"plan names unknown signals {extra}")
            for a in self.assignment.values():
                inst.action_index(a)
        else:
            if self.action is None:
                raise MenuforgeError("a plan without acquisition needs an action")
            inst.action_index(self.action)

    def action_indices(self, inst: ProblemInstance) -> list[int]:
        """Action index taken after each signal (in signal order)."""
        self.validate(inst)
        if self.acquire:
            return [inst.action_index(self.assignment[s]) for s in inst.signals]
        return [inst.action_index(self.action)] * len(inst.signals)


@dataclass
class SolveReport:
    regime: str
    status: str
    menu: Menu | None
    objective: float | None
    binding: dict[str, bool] = field(default_factory=dict)
    certificate: Any = None
    flags: tuple[str, ...] = ()
    reason: str | None = None
    details: dict[str, Any] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status in ("optimal", "trivial") and (
            self.certificate is None or self.certificate.passed
        )
