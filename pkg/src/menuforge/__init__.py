"""Optimal contract menus for hidden actions and costly information acquisition."""

from .contracts import (
    ContractInstance,
    cost_curve_eval,
    enumerate_optimal_menu,
    is_elicitable,
    is_strictly_elicitable,
    optimal_contract,
    solve_contract,
    strict_epsilon_optimal,
    strict_subgradient,
)
from .core import (
    AffinePiece,
    Contract,
    Menu,
    OutcomeSpace,
    Plan,
    ProblemInstance,
    SolveReport,
    as_belief,
    best_response_contract,
    expected_payment,
    menu_eval,
    min_payment,
    prior_decomposition,
)
from .errors import (
    DimensionMismatchError,
    InfeasibleError,
    InvalidBeliefError,
    MenuforgeError,
    NotElicitableError,
    OutsideHullError,
    TrivialInstanceError,
    ZeroMassError,
)
from .general import conditional_cost_curve, plan_precheck, solve_general, solve_general_p5, solve_general_p6
from .ia import IAInstance, base_cone, phi, phi_inverse, solve_ia, value_of_information
from .lp import LinearProgram, LpOutcome, LpStatus, solve_lp
from .verify import Certificate, agent_best_response, cost_curve_property_probe, ia_lp_oracle, verify_menu

__version__ = "0.1.0"
