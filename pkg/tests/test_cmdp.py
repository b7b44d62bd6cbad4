import itertools

import numpy as np
import pytest

from conftest import P_G, P_S, stationary_by_solve
from vaoi.analytic_singlehop import mean_threshold, optimal_threshold, rate_of_threshold
from vaoi.cmdp import (
    NonConvergenceError,
    StructureViolationError,
    build_kernel,
    extract_threshold,
    greedy_policy,
    policy_stationary,
    relative_value_iteration,
    solve_cmdp,
)
from vaoi.core import SystemParams


def brute_force_gain(kernel):
    """Minimum long-run cost over every deterministic stationary policy."""
    S = kernel.n_states
    best = np.inf
    for acts in itertools.product((0, 1), repeat=S):
        acts = np.array(acts)
        P = kernel.transition[acts, np.arange(S)]
        pi = stationary_by_solve(P)
        best = min(best, float(pi @ kernel.cost[acts, np.arange(S)]))
    return best


@pytest.mark.parametrize("lam", [0.0, 0.5, 3.0, 20.0])
def test_kernel_rows_stochastic(lam):
    k = build_kernel(P_S, P_G, 30, lam)
    assert np.allclose(k.transition.sum(axis=2), 1.0, atol=1e-15)
    assert np.all(k.transition >= 0)
    assert k.transition_cost(3, 1, 4) == 4 + lam


def test_kernel_branches():
    k = build_kernel(P_S, P_G, 10, 0.0)
    P0, P1 = k.transition
    assert P0[4, 5] == pytest.approx(P_G) and P0[4, 4] == pytest.approx(1 - P_G)
    assert P1[4, 0] == pytest.approx(P_S * (1 - P_G))
    assert P1[4, 1] == pytest.approx(P_S * P_G)
    assert P1[4, 5] == pytest.approx((1 - P_S) * P_G)
    assert P1[4, 4] == pytest.approx((1 - P_S) * (1 - P_G))
    assert P0[10, 10] == 1.0 and P1[10, 10] == pytest.approx(1 - P_S)
    # from state 0 a success and a stay overlap
    assert P1[0, 0] == pytest.approx(P_S * (1 - P_G) + (1 - P_S) * (1 - P_G))


def test_kernel_rejects_bad_input():
    with pytest.raises(ValueError):
        build_kernel(P_S, P_G, 1, 0.0)
    with pytest.raises(ValueError):
        build_kernel(P_S, P_G, 10, -1.0)


@pytest.mark.parametrize("lam", [0.0, 1.0, 4.0, 15.0])
def test_rvi_gain_matches_exhaustive_search(lam):
    kernel = build_kernel(P_S, P_G, 8, lam)
    sol = relative_value_iteration(kernel)
    assert sol.gain == pytest.approx(brute_force_gain(kernel), abs=1e-7)
    # the greedy policy attains the gain
    S = kernel.n_states
    pi = stationary_by_solve(kernel.transition[sol.policy, np.arange(S)])
    assert float(pi @ kernel.cost[sol.policy, np.arange(S)]) == pytest.approx(sol.gain, abs=1e-7)


def test_rvi_free_problem_always_updates():
    sol = relative_value_iteration(build_kernel(P_S, P_G, 200, 0.0))
    assert sol.gain == pytest.approx(P_G / P_S, abs=1e-8)
    assert extract_threshold(sol).threshold == 1
    assert sol.value[0] == 0.0


def test_rvi_huge_penalty_never_transmits():
    sol = relative_value_iteration(build_kernel(P_S, P_G, 200, 1e6))
    assert extract_threshold(sol).threshold == 201
    assert sol.gain == pytest.approx(200.0, abs=1e-6)


def test_rvi_nonconvergence():
    with pytest.raises(NonConvergenceError) as info:
        relative_value_iteration(build_kernel(P_S, P_G, 200, 5.0), max_iter=3)
    assert info.value.iterations == 3


@pytest.mark.parametrize("lam", [0.5, 2.0, 10.0, 76.0, 300.0])
def test_threshold_structure_and_monotone_advantage(lam):
    sol = relative_value_iteration(build_kernel(P_S, P_G, 200, lam))
    assert extract_threshold(sol).ok
    dv = sol.dv
    assert np.all(np.diff(dv) <= 1e-7)


def test_greedy_ties_go_to_idle():
    q = np.array([[1.0, 1.0], [2.0, 1.0], [1.0, 1.0 + 1e-14]])
    assert greedy_policy(q).tolist() == [0, 1, 0]


def test_extract_threshold():
    assert extract_threshold(np.array([0, 0, 1, 1])).threshold == 2
    assert extract_threshold(np.array([0, 0, 0])).threshold == 3
    bad = extract_threshold(np.array([0, 1, 0, 1]))
    assert not bad.ok and bad.threshold is None and bad.violations == (2,)


@pytest.mark.parametrize("T", [1, 2, 5, 9])
def test_policy_stationary_matches_closed_form(T):
    kernel = build_kernel(P_S, P_G, 300, 0.0)
    policy = (np.arange(301) >= T).astype(int)
    pi = policy_stationary(kernel, policy)
    assert float(pi @ np.arange(301)) == pytest.approx(mean_threshold(P_S, P_G, T), abs=1e-9)
    assert float(pi @ policy) == pytest.approx(rate_of_threshold(P_S, P_G, T), abs=1e-9)


@pytest.mark.parametrize("alpha, bracket", [(0.05, (7, 8)), (0.1, (3, 4)), (0.25, (1, 2))])
def test_solve_cmdp_matches_closed_form(alpha, bracket):
    params = SystemParams(P_S, P_G, alpha)
    sol = solve_cmdp(params, delta_max=200)
    ref = optimal_threshold(params)
    assert (sol.lower_policy, sol.upper_policy) == bracket
    assert sol.upper_policy == ref.delta_T_star
    assert sol.mixing == pytest.approx(ref.gamma, abs=1e-9)
    assert sol.rate_achieved == pytest.approx(alpha, abs=1e-9)
    assert sol.mean_vaoi == pytest.approx(ref.mean_vaoi, abs=1e-6)
    assert sol.lambda_star > 0
    lams = [t[0] for t in sol.trace]
    assert 0.0 in lams and len(sol.trace) > 10


def test_solve_cmdp_slack_budget():
    sol = solve_cmdp(SystemParams(P_S, P_G, 0.4))
    assert sol.lambda_star == 0.0
    assert sol.lower_policy == sol.upper_policy == 1
    assert sol.rate_achieved <= 0.4


def test_solve_cmdp_degenerate_inputs():
    sol = solve_cmdp(SystemParams(P_S, 0.0, 0.1), delta_max=50)
    assert sol.mean_vaoi == 0.0 and sol.rate_achieved == 0.0
    full = solve_cmdp(SystemParams(P_S, P_G, 1.0))
    assert full.upper_policy == 1 and full.mean_vaoi == pytest.approx(P_G / P_S)


def test_structure_violation_is_an_error_type():
    assert issubclass(StructureViolationError, RuntimeError)
