import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FIXTURES
from generators import precheck_plan, random_problem
from menuforge.cli import load_instance
from menuforge.contracts import ContractInstance, optimal_contract
from menuforge.core import OutcomeSpace, Plan, ProblemInstance, min_payments
from menuforge.errors import MenuforgeError
from menuforge.general import (
    conditional_cost_curve,
    plan_precheck,
    solve_general,
    solve_general_p5,
    solve_general_p6,
)
from menuforge.ia import solve_ia
from menuforge.lp import LpStatus
from menuforge.verify import agent_best_response, plan_utility

from generators import fully_revealing


@pytest.fixture(scope="module")
def tv():
    loaded = load_instance(FIXTURES / "tv_producer.json")
    return loaded.problem, loaded.plan


def test_single_action_curve_is_its_cost():
    inst = fully_revealing(2, 0.5).to_problem()
    assert conditional_cost_curve(inst, 0, inst.conditionals[0, 0]) == 0.0


def test_tv_example_curve_and_precheck(tv):
    inst, plan = tv
    # under w, a's belief (.2,.8) is an extreme point: the curve equals its cost
    assert conditional_cost_curve(inst, "w", [0.2, 0.8]) == pytest.approx(0.3)
    assert conditional_cost_curve(inst, "m", [0.7, 0.3]) == pytest.approx(0.1)
    assert plan_precheck(inst, plan) == {"w": True, "m": True}


def test_equal_cost_segment_is_flat():
    inst = ProblemInstance(OutcomeSpace(("x", "y")), ("s",), ("a", "b"), [1.0],
                           np.array([[[0.2, 0.8]], [[0.6, 0.4]]]), [0.4, 0.4], 0.0)
    assert conditional_cost_curve(inst, "s", [0.4, 0.6]) == pytest.approx(0.4)


def test_precheck_flags_dominated_action():
    inst = ProblemInstance(OutcomeSpace(("x", "y")), ("s",), ("a", "b", "c"), [1.0],
                           np.array([[[1.0, 0.0]], [[0.0, 1.0]], [[0.5, 0.5]]]), [0.0, 1.0, 1.0], 0.1)
    assert plan_precheck(inst, Plan(True, {"s": "c"})) == {"s": False}
    assert solve_general_p6(inst, Plan(True, {"s": "c"})).status is LpStatus.INFEASIBLE
    assert solve_general_p5(inst, Plan(True, {"s": "c"})).status is LpStatus.INFEASIBLE
    r = solve_general(inst, Plan(True, {"s": "c"}))
    assert r.status == "infeasible" and "off the conditional cost curve" in r.reason


def test_tv_example_solution(tv):
    inst, plan = tv
    r = solve_general(inst, plan)
    assert r.objective == pytest.approx(0.483333333, abs=1e-8)
    assert r.certificate.passes(1e-7)
    pays = sorted(tuple(np.round(h.to_contract().payments, 9)) for h in r.menu.pieces)
    assert pays == sorted([(0.0, round(2 / 3, 9)), (round(11 / 21, 9), 0.0)])
    p5 = solve_general(inst, plan, formulation="p5")
    assert p5.objective == pytest.approx(r.objective, abs=1e-9)


def test_ia_embedding_matches_closed_form():
    ia = fully_revealing(2, 0.5)
    r = solve_general(ia.to_problem(), ia.plan())
    assert r.objective == pytest.approx(solve_ia(ia).objective)


def test_contract_embedding_matches_single_contract():
    inst = ContractInstance.build([[1, 0], [0, 1]], [0.0, 1.0], 1)
    r = solve_general(inst.to_problem(), inst.plan())
    assert r.objective == pytest.approx(optimal_contract(inst).objective) == pytest.approx(1.0)


def test_full_program_size_on_micro_instance():
    inst = ProblemInstance(OutcomeSpace(("x", "y")), ("s",), ("a", "b"), [1.0],
                           np.array([[[1.0, 0.0]], [[0.0, 1.0]]]), [0.0, 1.0], 0.0)
    sol = solve_general_p5(inst, Plan(True, {"s": "b"}))
    assert sol.n_pieces == 4 and sol.n_parameter_blocks == 8
    assert set(sol.keys) == {"a|s", "a|⊥", "b|s", "b|⊥"}


def test_general_needs_acquiring_plan(tv):
    inst, _ = tv
    with pytest.raises(MenuforgeError):
        solve_general_p6(inst, Plan(False, {}, "a"))
    with pytest.raises(MenuforgeError, match="formulation"):
        solve_general(inst, Plan(True, {"w": "a", "m": "b"}), formulation="p7")


def test_reduced_program_reports_tight_rows(tv):
    inst, plan = tv
    sol = solve_general_p6(inst, plan)
    assert sol.optimal and any(sol.tight.values())
    assert any(k.startswith("limited_liability[") for k in sol.tight)


@settings(max_examples=30)
@given(st.integers(0, 10_000))
def test_random_plans_agree_and_certify(seed):
    rng = np.random.default_rng(seed)
    inst = random_problem(rng)
    plan = precheck_plan(rng, inst)
    p6 = solve_general_p6(inst, plan)
    p5 = solve_general_p5(inst, plan)
    assert p6.status is p5.status
    if not p6.optimal:
        return
    assert p5.objective == pytest.approx(p6.objective, abs=1e-6)
    menu = p6.menu
    _, best = agent_best_response(menu, inst)
    assert plan_utility(menu, inst, plan) >= best - 1e-7
    assert min_payments(menu).min() >= -1e-9
    for gap in menu.designation_gaps().values():
        assert gap <= 1e-7
