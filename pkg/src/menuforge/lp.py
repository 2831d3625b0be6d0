"""Dense two-phase simplex with Bland's rule.

Variables carry optional bounds (free by default).  Internally every variable
is rewritten as ``offset + sum of non-negative columns`` so the tableau only
ever sees ``z >= 0``:

    fixed l = u         x = l               (no column)
    lower bound l       x = l + z           (plus a row z <= u - l if u is set)
    upper bound only    x = u - z
    free                x = z+ - z-
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DimensionMismatchError, MenuforgeError

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-9
MAX_PIVOTS = 200_000
REFACTOR_EVERY = 50
STALL_LIMIT = 30

_RELATIONS = {"<=": "<=", "≤": "<=", "le": "<=", ">=": ">=", "≥": ">=", "ge": ">=", "=": "=", "==": "=", "eq": "="}


class LpStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass
class LinearProgram:
    objective: NDArray[np.float64]
    sense: str = "min"
    rows: list[NDArray[np.float64]] = field(default_factory=list)
    relations: list[str] = field(default_factory=list)
    rhs: list[float] = field(default_factory=list)
    labels: list[str] = field(default_factory=list)
    bounds: list[tuple[float | None, float | None]] | None = None

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=np.float64).reshape(-1)
        if self.sense not in ("min", "max"):
            raise MenuforgeError(f"objective sense must be 'min' or 'max', not {self.sense!r}")
        if self.bounds is None:
            self.bounds = [(None, None)] * self.n_vars
        elif len(self.bounds) != self.n_vars:
            raise DimensionMismatchError("variable bounds", self.n_vars, len(self.bounds))

    @property
    def n_vars(self) -> int:
        return self.objective.shape[0]

    def add_constraint(self, coeffs: ArrayLike, relation: str, rhs: float, label: str = "") -> None:
        row = np.asarray(coeffs, dtype=np.float64).reshape(-1)
        if row.shape[0] != self.n_vars:
            raise DimensionMismatchError(f"constraint {label or len(self.rows)}", self.n_vars, row.shape[0])
        try:
            rel = _RELATIONS[relation]
        except KeyError:
            raise MenuforgeError(f"unknown relation {relation!r}") from None
        self.rows.append(row)
        self.relations.append(rel)
        self.rhs.append(float(rhs))
        self.labels.append(label)

    def set_bounds(self, index: int, lower: float | None = None, upper: float | None = None) -> None:
        self.bounds[index] = (lower, upper)

    def slacks(self, x: ArrayLike) -> NDArray[np.float64]:
        """Per-row slack in the direction of the relation (negative means violated)."""
        x = np.asarray(x, dtype=np.float64)
        out = np.empty(len(self.rows))
        for i, (row, rel, b) in enumerate(zip(self.rows, self.relations, self.rhs)):
            lhs = float(row @ x)
            out[i] = b - lhs if rel == "<=" else lhs - b if rel == ">=" else -abs(lhs - b)
        return out


@dataclass(frozen=True)
class LpOutcome:
    status: LpStatus
    value: float | None = None
    x: NDArray[np.float64] | None = None
    pivots: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


def _pivot(T: NDArray[np.float64], row: int, col: int) -> None:
    T[row] /= T[row, col]
    factor = T[:, col].copy()
    factor[row] = 0.0
    T -= np.outer(factor, T[row])


def _refactor(T: NDArray[np.float64], basis: list[int], T0: NDArray[np.float64], cost: NDArray[np.float64]) -> None:
    """Rebuild the tableau from the original rows for the current basis."""
    m = T.shape[0] - 1
    B = T0[:, basis]
    if np.linalg.cond(B) > 1e12:
        return
    T[:m] = np.linalg.solve(B, T0)
    T[:m, basis] = np.eye(m)
    T[:m, -1][np.abs(T[:m, -1]) < 1e-12] = 0.0
    T[m] = cost - cost[basis] @ T[:m]
    T[m, basis] = 0.0


def _leaving_row(T: NDArray[np.float64], basis: list[int], col: int, bland: bool) -> int | None:
    m = T.shape[0] - 1
    column = T[:m, col]
    positive = np.flatnonzero(column > PIVOT_TOL)
    if positive.size == 0:
        return None
    rhs = np.maximum(T[positive, -1], 0.0)
    piv = column[positive]
    ratios = rhs / piv
    if bland:
        best = ratios.min()
        eligible = ratios <= best + PIVOT_TOL * max(1.0, abs(best))
    else:
        # two passes: a slightly relaxed step bound, then the largest pivot under it
        eligible = ratios <= ((rhs + FEAS_TOL) / piv).min()
    largest = piv[eligible].max()
    keep = eligible & (piv >= largest * (1e-3 if bland else 1.0 - 1e-12))
    return int(min(positive[keep], key=lambda r: basis[r]))


def _run_simplex(T: NDArray[np.float64], basis: list[int], n_cols: int, T0: NDArray[np.float64],
                 cost: NDArray[np.float64]) -> tuple[str, int]:
    """Minimise over the tableau in place; the last row holds reduced costs.

    Only the first ``n_cols`` columns may enter.  Pricing is most-negative
    reduced cost; after a run of degenerate pivots it switches to Bland's rule
    (lowest-index entering column, lowest-index leaving variable among ties)
    until the objective moves again.  The tableau is periodically rebuilt from
    the original rows ``T0`` to stop round-off from accumulating.
    """
    m = T.shape[0] - 1
    pivots = 0
    degenerate_run = 0
    since_refactor = 0
    while True:
        reduced = T[m, :n_cols]
        candidates = np.flatnonzero(reduced < -PIVOT_TOL)
        bland = degenerate_run > STALL_LIMIT
        if candidates.size:
            col = int(candidates[0]) if bland else int(candidates[np.argmin(reduced[candidates])])
            row = _leaving_row(T, basis, col, bland)
        if candidates.size == 0 or row is None:
            if since_refactor:
                # confirm the verdict on a freshly rebuilt tableau
                _refactor(T, basis, T0, cost)
                since_refactor = 0
                continue
            return ("optimal" if candidates.size == 0 else "unbounded"), pivots
        step = max(T[row, -1], 0.0) / T[row, col]
        degenerate_run = degenerate_run + 1 if step * -reduced[col] <= FEAS_TOL else 0
        _pivot(T, row, col)
        basis[row] = col
        pivots += 1
        since_refactor += 1
        if since_refactor >= REFACTOR_EVERY:
            _refactor(T, basis, T0, cost)
            since_refactor = 0
        if pivots > MAX_PIVOTS:
            raise MenuforgeError("simplex exceeded the pivot limit")


def solve_lp(lp: LinearProgram) -> LpOutcome:
    n = lp.n_vars
    for i, row in enumerate(lp.rows):
        if row.shape[0] != n:
            raise DimensionMismatchError(f"constraint {i}", n, row.shape[0])

    # variable substitution x = offset + M z, z >= 0
    offset = np.zeros(n)
    columns: list[tuple[int, float]] = []  # (original variable, sign)
    extra_rows: list[tuple[int, float]] = []  # (z column, upper limit)
    for j, (lo, hi) in enumerate(lp.bounds):
        if lo is not None and hi is not None and hi < lo:
            return LpOutcome(LpStatus.INFEASIBLE)
        if lo is not None and hi is not None and hi == lo:
            offset[j] = lo
        elif lo is not None:
            offset[j] = lo
            columns.append((j, 1.0))
            if hi is not None:
                extra_rows.append((len(columns) - 1, hi - lo))
        elif hi is not None:
            offset[j] = hi
            columns.append((j, -1.0))
        else:
            columns.append((j, 1.0))
            columns.append((j, -1.0))
    M = np.zeros((n, len(columns)))
    for k, (j, sign) in enumerate(columns):
        M[j, k] = sign
    nz = len(columns)

    A_rows, rels, b = [], [], []
    for row, rel, rhs in zip(lp.rows, lp.relations, lp.rhs):
        A_rows.append(row @ M)
        rels.append(rel)
        b.append(rhs - row @ offset)
    for k, limit in extra_rows:
        r = np.zeros(nz)
        r[k] = 1.0
        A_rows.append(r)
        rels.append("<=")
        b.append(limit)
    m = len(A_rows)
    A = np.array(A_rows).reshape(m, nz)
    b = np.array(b, dtype=np.float64)

    sign = 1.0 if lp.sense == "min" else -1.0
    cost = sign * (lp.objective @ M)
    const = float(lp.objective @ offset)

    # orient rows so that as many as possible get a slack as the starting basis
    for i in range(m):
        flip = b[i] < 0 or (rels[i] == ">=" and b[i] == 0)
        if flip:
            A[i] = -A[i]
            b[i] = -b[i]
            rels[i] = {"<=": ">=", ">=": "<=", "=": "="}[rels[i]]

    n_slack = sum(1 for r in rels if r != "=")
    n_art = sum(1 for r in rels if r != "<=")
    width = nz + n_slack + n_art
    T = np.zeros((m + 1, width + 1))
    T[:m, :nz] = A
    T[:m, -1] = b
    basis: list[int] = []
    s_col, a_col = nz, nz + n_slack
    artificial = []
    for i, rel in enumerate(rels):
        if rel == "<=":
            T[i, s_col] = 1.0
            basis.append(s_col)
            s_col += 1
        else:
            if rel == ">=":
                T[i, s_col] = -1.0
                s_col += 1
            T[i, a_col] = 1.0
            basis.append(a_col)
            artificial.append(i)
            a_col += 1

    pivots = 0
    first_art = nz + n_slack
    T0 = T[:m].copy()
    if n_art:
        cost1 = np.zeros(width + 1)
        cost1[first_art:width] = 1.0
        T[m] = cost1
        for i in artificial:
            T[m] -= T[i]
        _, used = _run_simplex(T, basis, width, T0, cost1)
        pivots += used
        if -T[m, -1] > FEAS_TOL * max(1.0, float(np.abs(b).max(initial=0.0))):
            return LpOutcome(LpStatus.INFEASIBLE, pivots=pivots)
        # drive zero-level artificials out of the basis; drop redundant rows
        keep = []
        for i in range(m):
            if basis[i] >= first_art:
                nonzero = np.flatnonzero(np.abs(T[i, :first_art]) > PIVOT_TOL)
                if nonzero.size == 0:
                    continue
                _pivot(T, i, int(nonzero[0]))
                basis[i] = int(nonzero[0])
            keep.append(i)
        T = np.vstack([T[keep], T[m:m + 1]])
        basis = [basis[i] for i in keep]
        T = np.hstack([T[:, :first_art], T[:, -1:]])
        T0 = np.hstack([T0[keep][:, :first_art], T0[keep][:, -1:]])
        m = len(keep)
        width = first_art

    cost2 = np.zeros(width + 1)
    cost2[:nz] = cost
    T[m] = cost2
    for i, j in enumerate(basis):
        if T[m, j] != 0.0:
            T[m] -= T[m, j] * T[i]
    state, used = _run_simplex(T, basis, width, T0, cost2)
    pivots += used
    if state == "unbounded":
        return LpOutcome(LpStatus.UNBOUNDED, pivots=pivots)

    z = np.zeros(width)
    for i, j in enumerate(basis):
        z[j] = T[i, -1]
    x = offset + M @ z[:nz]
    value = float(lp.objective @ x)
    return LpOutcome(LpStatus.OPTIMAL, value, x, pivots)
