import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog

from menuforge.errors import DimensionMismatchError, MenuforgeError
from menuforge.lp import LinearProgram, LpStatus, solve_lp


def _lp(c, sense="min", rows=(), bounds=None):
    lp = LinearProgram(np.asarray(c, dtype=float), sense, bounds=bounds)
    for coeffs, rel, b in rows:
        lp.add_constraint(coeffs, rel, b)
    return lp


def test_single_variable_bound():
    out = solve_lp(_lp([1.0], "max", [([1.0], "<=", 3.0)], bounds=[(0.0, None)]))
    assert out.status is LpStatus.OPTIMAL
    assert out.value == pytest.approx(3.0) and out.x == pytest.approx([3.0])


def test_simplex_face():
    out = solve_lp(_lp([1.0, 1.0], "max", [([1.0, 1.0], "<=", 1.0)], bounds=[(0.0, None)] * 2))
    assert out.optimal and out.value == pytest.approx(1.0)


def test_unbounded_ray():
    assert solve_lp(_lp([1.0], "max", bounds=[(0.0, None)])).status is LpStatus.UNBOUNDED


def test_contradictory_bounds_infeasible():
    out = solve_lp(_lp([0.0], "min", [([1.0], "<=", -1.0)], bounds=[(0.0, None)]))
    assert out.status is LpStatus.INFEASIBLE
    assert solve_lp(_lp([0.0], bounds=[(1.0, 0.0)])).status is LpStatus.INFEASIBLE


def test_free_and_upper_bounded_variables():
    # min x - y, x free with x >= -2 as a row, y <= 5
    out = solve_lp(_lp([1.0, -1.0], "min", [([1.0, 0.0], ">=", -2.0)], bounds=[(None, None), (None, 5.0)]))
    assert out.optimal and out.x == pytest.approx([-2.0, 5.0]) and out.value == pytest.approx(-7.0)


def test_fixed_variable_has_no_freedom():
    out = solve_lp(_lp([1.0, 1.0], "max", [([1.0, 1.0], "<=", 10.0)], bounds=[(2.5, 2.5), (0.0, None)]))
    assert out.optimal and out.x == pytest.approx([2.5, 7.5])


def test_equality_rows():
    out = solve_lp(_lp([1.0, 2.0, 3.0], "min", [([1, 1, 1], "=", 1.0), ([1, -1, 0], "=", 0.0)],
                       bounds=[(0.0, None)] * 3))
    assert out.optimal and out.x == pytest.approx([0.5, 0.5, 0.0]) and out.value == pytest.approx(1.5)


def test_dimension_errors():
    lp = LinearProgram(np.zeros(2))
    with pytest.raises(DimensionMismatchError):
        lp.add_constraint([1.0, 2.0, 3.0], "<=", 1.0)
    with pytest.raises(DimensionMismatchError):
        LinearProgram(np.zeros(2), bounds=[(0, None)])
    with pytest.raises(MenuforgeError):
        lp.add_constraint([1.0, 2.0], "<>", 1.0)


def test_relation_aliases():
    lp = LinearProgram(np.array([1.0]), "max", bounds=[(0.0, None)])
    lp.add_constraint([1.0], "≤", 2.0)
    assert solve_lp(lp).value == pytest.approx(2.0)


def test_degenerate_cycling_example_terminates():
    # Beale's classic cycling program
    c = [-0.75, 150.0, -0.02, 6.0]
    rows = [([0.25, -60.0, -0.04, 9.0], "<=", 0.0), ([0.5, -90.0, -0.02, 3.0], "<=", 0.0),
            ([0.0, 0.0, 1.0, 0.0], "<=", 1.0)]
    out = solve_lp(_lp(c, "min", rows, bounds=[(0.0, None)] * 4))
    assert out.optimal and out.value == pytest.approx(-0.05)


def _random_program(rng, m, n):
    A = rng.normal(size=(m, n))
    x0 = rng.uniform(0.0, 1.0, n)
    b = A @ x0 + rng.uniform(0.0, 1.0, m)
    c = rng.normal(size=n)
    return A, b, c


@given(st.integers(0, 10_000), st.integers(1, 6), st.integers(1, 6))
def test_matches_highs(seed, m, n):
    rng = np.random.default_rng(seed)
    A, b, c = _random_program(rng, m, n)
    ub = rng.uniform(1.0, 3.0, n) if rng.random() < 0.5 else None
    bounds = [(0.0, None if ub is None else float(u)) for u in (ub if ub is not None else [None] * n)]
    ours = solve_lp(_lp(c, "min", [(row, "<=", bi) for row, bi in zip(A, b)], bounds=bounds))
    ref = linprog(c, A_ub=A, b_ub=b, bounds=bounds, method="highs", options={"presolve": False})
    if ref.status == 0:
        assert ours.optimal
        assert ours.value == pytest.approx(ref.fun, abs=1e-7, rel=1e-7)
        lp = _lp(c, "min", [(row, "<=", bi) for row, bi in zip(A, b)], bounds=bounds)
        assert lp.slacks(ours.x).min() >= -1e-7
        assert float(c @ ours.x) == pytest.approx(ours.value, abs=1e-7)
    else:
        assert ref.status == 3 and ours.status is LpStatus.UNBOUNDED


@given(st.integers(0, 10_000), st.integers(1, 5), st.integers(1, 5))
def test_strong_duality(seed, m, n):
    # primal: max c.x, Ax <= b, x >= 0; dual: min b.y, A^T y >= c, y >= 0
    rng = np.random.default_rng(seed)
    A = rng.uniform(0.1, 1.0, size=(m, n))
    b = rng.uniform(1.0, 2.0, m)
    c = rng.uniform(-1.0, 1.0, n)
    primal = solve_lp(_lp(c, "max", [(row, "<=", bi) for row, bi in zip(A, b)], bounds=[(0.0, None)] * n))
    dual = solve_lp(_lp(b, "min", [(col, ">=", ci) for col, ci in zip(A.T, c)], bounds=[(0.0, None)] * m))
    assert primal.optimal and dual.optimal
    assert primal.value == pytest.approx(dual.value, abs=1e-6)


def test_deterministic_bitwise(rng):
    A, b, c = _random_program(rng, 8, 6)
    make = lambda: _lp(c, "min", [(row, "<=", bi) for row, bi in zip(A, b)], bounds=[(0.0, None)] * 6)
    first, second = solve_lp(make()), solve_lp(make())
    assert first.status is second.status
    assert first.value == second.value and np.array_equal(first.x, second.x)
