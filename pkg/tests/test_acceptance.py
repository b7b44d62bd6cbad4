"""End-to-end acceptance checks; each test prints one PASS/FAIL line.

Simulation budgets follow the reference setup: 10^4 slots x 400 replications
at (p_s, p_g) = (0.8, 0.3).
"""

import time

import numpy as np
import pytest

from conftest import P_G, P_S
from vaoi.analytic_singlehop import (
    balance_residual,
    mean_rs,
    mean_threshold,
    mean_uniform,
    optimal_threshold,
    phase_chains_uniform,
    required_rate,
    rs_transition_matrix,
    stationary_optimal,
    stationary_rs,
    stationary_threshold,
    stationary_uniform,
    threshold_transition_matrix,
    uniform_phase_matrix,
)
from vaoi.cmdp import build_kernel, extract_threshold, relative_value_iteration, solve_cmdp
from vaoi.core import (
    MultiHopTopology,
    RandomizedStationary,
    SystemParams,
    Uniform,
    pmf_mean,
    pmf_total_variation,
    uniform_period,
)
from vaoi.multihop import beta_mean, tau_normal_pmf, tau_pmf_convolution, tau_pmf_negbin
from vaoi.simulator import SimConfig, empirical_tau, simulate_multihop, simulate_singlehop

PAPER = SimConfig(horizon_T=10_000, replications=400, master_seed=2024)


def family_policies(alpha):
    params = SystemParams(P_S, P_G, alpha)
    return {
        "rs": (RandomizedStationary(alpha), stationary_rs(params)),
        "uniform": (Uniform(uniform_period(alpha)), stationary_uniform(P_S, P_G, uniform_period(alpha))),
        "threshold": (optimal_threshold(params).policy, stationary_optimal(params)),
    }


def test_criterion_1_closed_form_self_consistency(criterion):
    t0 = time.perf_counter()
    worst_res, worst_mean = 0.0, 0.0
    for T in range(16):
        pmf = stationary_threshold(P_S, P_G, T)
        worst_res = max(worst_res, balance_residual(pmf, threshold_transition_matrix(P_S, P_G, T, len(pmf))))
        worst_mean = max(worst_mean, abs(mean_threshold(P_S, P_G, T) - pmf_mean(pmf)) - pmf.mean_error)
    for alpha in (0.05, 0.1, 0.25):
        params = SystemParams(P_S, P_G, alpha)
        pmf = stationary_rs(params)
        worst_res = max(worst_res, balance_residual(pmf, rs_transition_matrix(params, len(pmf))))
        worst_mean = max(worst_mean, abs(mean_rs(params) - pmf_mean(pmf)) - pmf.mean_error)
    for D in range(1, 21):
        for q, chain in enumerate(phase_chains_uniform(P_S, P_G, D), start=1):
            worst_res = max(worst_res, balance_residual(chain, uniform_phase_matrix(P_S, P_G, D, q, len(chain))))
        # independent closed form for the phase-averaged mean
        oracle = P_G * (D + 1) / 2 + D * P_G * (1 - P_S) / P_S
        pmf = stationary_uniform(P_S, P_G, D)
        worst_mean = max(worst_mean, abs(mean_uniform(P_S, P_G, D) - pmf_mean(pmf)) - pmf.mean_error)
        worst_mean = max(worst_mean, abs(oracle - pmf_mean(pmf)) - pmf.tail_bound * len(pmf) * 10)
    elapsed = time.perf_counter() - t0
    ok = worst_res < 1e-9 and worst_mean < 1e-8 and elapsed < 1.0
    criterion("1 closed-form self-consistency", ok,
              f"max residual {worst_res:.2e}, max mean gap {max(worst_mean, 0):.2e}, {elapsed:.2f}s")
    assert worst_res < 1e-9
    assert worst_mean < 1e-8
    assert elapsed < 1.0


def test_criterion_2_randomized_mean(criterion):
    t0 = time.perf_counter()
    params = SystemParams(P_S, P_G, 0.25)
    exact = mean_rs(params)
    res = simulate_singlehop(params, RandomizedStationary(0.25), PAPER)
    elapsed = time.perf_counter() - t0
    rel = abs(res.node_mean() - 1.5) / 1.5
    ok = exact == 1.5 and rel < 0.02 and elapsed < 10
    criterion("2 randomized mean", ok, f"analytic {exact!r}, simulated {res.node_mean():.4f} ({rel:.2%}), {elapsed:.1f}s")
    assert exact == 1.5
    assert rel < 0.02
    assert elapsed < 10


def test_criterion_3_occupancy_agreement(criterion):
    t0 = time.perf_counter()
    tvs = {}
    for alpha in (0.25, 0.05):
        params = SystemParams(P_S, P_G, alpha)
        for name, (policy, exact) in family_policies(alpha).items():
            res = simulate_singlehop(params, policy, PAPER)
            tvs[(alpha, name)] = pmf_total_variation(exact, res.pmf())
    elapsed = time.perf_counter() - t0
    worst = max(tvs.values())
    ok = worst < 0.01 and elapsed < 60
    criterion("3 analytic vs empirical occupancy", ok, f"max TV {worst:.4f} over {len(tvs)} cases, {elapsed:.1f}s")
    for key, tv in tvs.items():
        assert tv < 0.01, key
    assert elapsed < 60


def test_criterion_4_optimal_mixture(criterion):
    params = SystemParams(P_S, P_G, 0.05)
    sol = optimal_threshold(params)
    res = simulate_singlehop(params, sol.policy, PAPER)
    z = abs(res.rate - 0.05) / res.rate_stderr
    ok = (
        sol.delta_T_star == 8
        and abs(sol.gamma - 0.4576) <= 1e-3
        and abs(sol.rate_achieved - 0.05) <= 1e-9
        and z <= 3
    )
    criterion("4 optimal threshold mixture", ok,
              f"T*={sol.delta_T_star}, gamma={sol.gamma:.6f}, simulated rate {res.rate:.5f} ({z:.2f} SE)")
    assert sol.delta_T_star == 8
    assert sol.gamma == pytest.approx(0.4576, abs=1e-3)
    assert sol.rate_achieved == pytest.approx(0.05, abs=1e-9)
    assert z <= 3


def test_criterion_5_required_rates(criterion):
    t0 = time.perf_counter()
    rs = required_rate("rs", P_S, P_G, 2.0)
    thr = required_rate("threshold", P_S, P_G, 2.0)
    uni = required_rate("uniform", P_S, P_G, 2.0)
    elapsed = time.perf_counter() - t0
    lo, hi = uni.interval
    checks = [
        abs(rs.rate - 0.1875) <= 1e-6,
        abs(thr.rate - 0.086) <= 0.002,
        lo <= 0.1112 and hi >= 0.125 - 1e-12,
        lo <= 0.121 <= hi,
        abs(uni.interpolated - 0.121) <= 0.002,
        elapsed < 5,
    ]
    criterion("5 required update rates", all(checks),
              f"rs {rs.rate:.6f}, threshold {thr.rate:.6f}, uniform ({lo:.4f}, {hi:.4f}) "
              f"crossing {uni.interpolated:.4f}, {elapsed:.2f}s")
    assert all(checks), checks


def test_criterion_6_cmdp_cross_check(criterion):
    t0 = time.perf_counter()
    failures = []
    for alpha in (0.05, 0.1, 0.25):
        params = SystemParams(P_S, P_G, alpha)
        sol = solve_cmdp(params, delta_max=200)
        star = optimal_threshold(params).delta_T_star
        if not sol.lower_policy <= star <= sol.upper_policy:
            failures.append(f"alpha={alpha}: bracket ({sol.lower_policy}, {sol.upper_policy}) misses {star}")
        grid = sorted({lam for lam, _, _ in sol.trace} | set(np.linspace(0, 2 * sol.lambda_star, 9)))
        v = None
        for lam in grid:
            rvi = relative_value_iteration(build_kernel(P_S, P_G, 200, lam), v0=v)
            v = rvi.value
            if not extract_threshold(rvi).ok:
                failures.append(f"alpha={alpha}, lam={lam}: not a threshold policy")
            if np.any(np.diff(rvi.dv) > 1e-7):
                failures.append(f"alpha={alpha}, lam={lam}: dV increases")
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 30
    criterion("6 CMDP cross-check", ok, f"{len(failures)} issues, {elapsed:.1f}s")
    assert not failures, failures
    assert elapsed < 30


def test_criterion_7_multihop_offset(criterion):
    t0 = time.perf_counter()
    worst = 0.0
    rows = []
    for N, rho in ((6, 0.7), (24, 0.7), (6, 0.9)):
        topo = MultiHopTopology.uniform(N, rho)
        offset = beta_mean(topo, P_G)
        for name, (policy, _) in family_policies(0.05).items():
            res = simulate_multihop(SystemParams(P_S, P_G, 0.05), topo, policy, PAPER)
            got = res.node_mean(N + 1) - res.node_mean(1)
            rel = abs(got - offset) / offset
            worst = max(worst, rel)
            rows.append((N, rho, name, rel))
    elapsed = time.perf_counter() - t0
    ok = worst < 0.02 and elapsed < 300
    criterion("7 multi-hop destination offset", ok, f"max relative error {worst:.2%}, {elapsed:.1f}s")
    for N, rho, name, rel in rows:
        assert rel < 0.02, (N, rho, name, rel)
    assert elapsed < 300


def test_criterion_8_relay_delay_laws(criterion):
    gaps = []
    for N, rho in ((1, 0.5), (6, 0.7), (24, 0.7), (6, 0.9), (60, 0.3)):
        nb = tau_pmf_negbin(N, rho)
        conv = tau_pmf_convolution(MultiHopTopology.uniform(N, rho))
        L = max(len(nb.pmf), len(conv.pmf))
        gaps.append(float(np.max(np.abs(nb.pmf.padded(L) - conv.pmf.padded(L)))))
    exact_gap = max(gaps)

    emp_tv = []
    for N in (6, 24):
        emp = empirical_tau(MultiHopTopology.uniform(N, 0.7), SimConfig(master_seed=N), samples=1_000_000)
        emp_tv.append(pmf_total_variation(emp, tau_pmf_negbin(N, 0.7).absolute_pmf()))

    nb24 = tau_pmf_negbin(24, 0.7)
    normal = tau_normal_pmf(MultiHopTopology.uniform(24, 0.7), nb24.support)
    normal_tv = 0.5 * float(np.abs(nb24.pmf.probs - normal).sum()) + 0.5 * float(1.0 - normal.sum())

    parts = [exact_gap < 1e-12, max(emp_tv) < 0.02, normal_tv < 0.05]
    criterion("8 relay-delay laws", all(parts),
              f"(a) max |conv-negbin| {exact_gap:.1e}; (b) sampled TV {max(emp_tv):.4f}; "
              f"(c) TV(negbin, normal) at N=24 {normal_tv:.4f} vs bound 0.05")
    assert exact_gap < 1e-12
    assert max(emp_tv) < 0.02
    assert normal_tv < 0.05


def test_criterion_9_aoi_special_case(criterion):
    worst = 0.0
    means = []
    for alpha in (0.05, 0.25, 0.7, 1.0):
        params = SystemParams(P_S, 1.0, alpha)
        pmf = stationary_rs(params)
        q = alpha * P_S
        n = np.arange(1, len(pmf))
        worst = max(worst, abs(pmf[0]), float(np.max(np.abs(pmf.probs[1:] - q * (1 - q) ** (n - 1)))))
        means.append(abs(mean_rs(params) - 1.0 / q))
    ok = worst < 1e-12 and max(means) < 1e-12
    criterion("9 AoI special case", ok, f"max deviation {worst:.1e}, mean gap {max(means):.1e}")
    assert worst < 1e-12
    assert max(means) < 1e-12
