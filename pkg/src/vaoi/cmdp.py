"""Constrained MDP for on-off scheduling under an update-rate budget.

The state is the receiver VAoI capped at ``delta_max``. The budget is
relaxed with a multiplier ``lam`` charged per transmission; each relaxed
problem is an average-cost MDP solved by relative value iteration, and the
multiplier is bisected until the greedy policy straddles the budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import SystemParams, _check_prob
from .analytic_singlehop import mean_threshold, rate_of_threshold

__all__ = [
    "MdpKernel",
    "MdpSolution",
    "CmdpSolution",
    "ThresholdStructure",
    "NonConvergenceError",
    "StructureViolationError",
    "build_kernel",
    "relative_value_iteration",
    "extract_threshold",
    "greedy_policy",
    "policy_stationary",
    "solve_cmdp",
    "default_delta_max",
]

# relative slack below which Q(s,1) and Q(s,0) count as tied (idle wins ties)
TIE_RTOL = 1e-10
LAMBDA_TOL = 1e-9


class NonConvergenceError(RuntimeError):
    def __init__(self, iterations, span):
        super().__init__(f"value iteration did not converge after {iterations} sweeps (span {span:.3e})")
        self.iterations = iterations
        self.span = span


class StructureViolationError(RuntimeError):
    pass


@dataclass(frozen=True)
class MdpKernel:
    """``transition[a, s, s']`` and expected one-step cost ``cost[a, s]``."""

    p_s: float
    p_g: float
    delta_max: int
    lam: float
    transition: np.ndarray = field(repr=False)
    cost: np.ndarray = field(repr=False)

    @property
    def n_states(self) -> int:
        return self.delta_max + 1

    def transition_cost(self, s, a, s_next) -> float:
        return s_next + self.lam * a


def build_kernel(p_s: float, p_g: float, delta_max: int, lam: float) -> MdpKernel:
    p_s = _check_prob("p_s", p_s, open_low=True)
    p_g = _check_prob("p_g", p_g)
    if delta_max < 2:
        raise ValueError("delta_max must be at least 2")
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    S = delta_max + 1
    qs, qg = 1.0 - p_s, 1.0 - p_g
    P = np.zeros((2, S, S))
    idx = np.arange(delta_max)

    # idle: +1 on a generation, else stay; the cap absorbs
    P[0, idx, idx + 1] += p_g
    P[0, idx, idx] += qg
    P[0, delta_max, delta_max] += 1.0

    # transmit: a failed attempt behaves like idle, success resets to 0 or 1
    P[1, idx, idx + 1] += qs * p_g
    P[1, idx, idx] += qs * qg
    P[1, delta_max, delta_max] += qs
    P[1, :, 1] += p_s * p_g
    P[1, :, 0] += p_s * qg

    states = np.arange(S, dtype=float)
    cost = P @ states
    cost[1] += lam
    for arr in (P, cost):
        arr.flags.writeable = False
    return MdpKernel(p_s, p_g, delta_max, float(lam), P, cost)


@dataclass(frozen=True)
class MdpSolution:
    policy: np.ndarray
    gain: float
    value: np.ndarray
    q_values: np.ndarray
    iterations: int
    span: float

    @property
    def dv(self) -> np.ndarray:
        """Q(s, 1) - Q(s, 0)."""
        return self.q_values[:, 1] - self.q_values[:, 0]


def greedy_policy(q_values: np.ndarray) -> np.ndarray:
    q0, q1 = q_values[:, 0], q_values[:, 1]
    slack = TIE_RTOL * np.maximum(1.0, np.abs(q0))
    return (q1 < q0 - slack).astype(np.int8)


def relative_value_iteration(
    kernel: MdpKernel,
    tol: float = 1e-9,
    max_iter: int = 200_000,
    v0: np.ndarray | None = None,
) -> MdpSolution:
    """Average-cost value iteration normalized at state 0.

    Stops once the span of successive value differences drops below ``tol``;
    the gain is the midpoint of that difference's range.
    """
    P, c = kernel.transition, kernel.cost
    v = np.zeros(kernel.n_states) if v0 is None else np.array(v0, dtype=float)
    v = v - v[0]
    span = math.inf
    for k in range(1, max_iter + 1):
        q = c + P @ v  # shape (2, S)
        w = q.min(axis=0)
        diff = w - v
        lo, hi = diff.min(), diff.max()
        span = hi - lo
        v = w - w[0]
        if span < tol:
            q_values = (c + P @ v).T
            gain = 0.5 * (lo + hi)
            return MdpSolution(greedy_policy(q_values), float(gain), v, q_values, k, float(span))
    raise NonConvergenceError(max_iter, span)


@dataclass(frozen=True)
class ThresholdStructure:
    """Result of checking a policy for the 0...0 1...1 shape.

    ``threshold`` is the first transmitting state (``len(policy)`` when the
    policy never transmits) and is None when the shape is violated.
    """

    threshold: int | None
    violations: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.violations


def extract_threshold(solution) -> ThresholdStructure:
    actions = np.asarray(getattr(solution, "policy", solution)).astype(int)
    on = np.flatnonzero(actions == 1)
    if on.size == 0:
        return ThresholdStructure(actions.size)
    first = int(on[0])
    bad = tuple(int(s) for s in np.flatnonzero(actions[first:] == 0) + first)
    if bad:
        return ThresholdStructure(None, bad)
    return ThresholdStructure(first)


def policy_stationary(kernel: MdpKernel, policy) -> np.ndarray:
    """Stationary law of the chain induced by a deterministic policy."""
    policy = np.asarray(policy, dtype=int)
    S = kernel.n_states
    P = kernel.transition[policy, np.arange(S), :]
    A = P.T - np.eye(S)
    A[-1, :] = 1.0
    b = np.zeros(S)
    b[-1] = 1.0
    pi = np.linalg.solve(A, b)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _rate_and_mean(kernel, policy):
    pi = policy_stationary(kernel, policy)
    rate = float(pi @ np.asarray(policy, dtype=float))
    mean = float(pi @ np.arange(kernel.n_states))
    return rate, mean


@dataclass(frozen=True)
class CmdpSolution:
    """``upper_policy`` is applied w.p. ``mixing``, ``lower_policy`` otherwise.

    ``lower_policy``/``upper_policy`` are thresholds with the lower one
    transmitting more often. ``mean_vaoi`` is the mixture's average VAoI
    evaluated on the capped chain.
    """

    lambda_star: float
    lower_policy: int
    upper_policy: int
    mixing: float
    rate_achieved: float
    mean_vaoi: float
    delta_max: int
    trace: tuple = ()


def default_delta_max(params: SystemParams) -> int:
    return max(200, 20 * math.ceil(params.p_g / (params.alpha * params.p_s)))


def solve_cmdp(
    params: SystemParams,
    delta_max: int | None = None,
    tol: float = 1e-9,
    max_iter: int = 200_000,
) -> CmdpSolution:
    """Solve the rate-constrained problem through its Lagrangian dual.

    If the free (``lam = 0``) greedy policy already respects the budget the
    constraint is slack: ``lambda_star`` is 0, no mixing is applied and
    ``rate_achieved`` may be below alpha. Otherwise the multiplier is
    bisected to width ``LAMBDA_TOL`` and the two bracketing thresholds are
    mixed so the long-run rate equals alpha.

    ``trace`` lists ``(lam, threshold, rate)`` for every relaxed solve.
    """
    p_s, p_g, alpha = params.p_s, params.p_g, params.alpha
    if delta_max is None:
        delta_max = default_delta_max(params)

    if p_g == 0.0:
        # the chain sits at 0 whatever the policy; report "never transmit"
        return CmdpSolution(0.0, delta_max, delta_max, 1.0, 0.0, 0.0, delta_max)
    if alpha >= 1.0:
        rate = rate_of_threshold(p_s, p_g, 1)
        return CmdpSolution(0.0, 1, 1, 1.0, rate, mean_threshold(p_s, p_g, 1), delta_max)

    trace = []
    v_warm = None

    def relaxed(lam):
        nonlocal v_warm
        kernel = build_kernel(p_s, p_g, delta_max, lam)
        sol = relative_value_iteration(kernel, tol, max_iter, v0=v_warm)
        v_warm = sol.value
        shape = extract_threshold(sol)
        if not shape.ok:
            raise StructureViolationError(
                f"greedy policy at lam={lam} is not a threshold policy (states {shape.violations})"
            )
        rate, mean = _rate_and_mean(kernel, sol.policy)
        trace.append((lam, shape.threshold, rate))
        return shape.threshold, rate, mean

    T0, r0, m0 = relaxed(0.0)
    if r0 <= alpha:
        return CmdpSolution(0.0, T0, T0, 1.0, r0, m0, delta_max, tuple(trace))

    lo, hi = 0.0, 1.0
    lo_res = (T0, r0, m0)
    hi_res = relaxed(hi)
    while hi_res[1] > alpha:
        lo, lo_res = hi, hi_res
        hi *= 2.0
        hi_res = relaxed(hi)
        if hi > 1e12:
            raise RuntimeError("could not find a multiplier meeting the rate budget")

    while hi - lo > LAMBDA_TOL * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        res = relaxed(mid)
        if res[1] > alpha:
            lo, lo_res = mid, res
        else:
            hi, hi_res = mid, res

    T_lo, T_hi = lo_res[0], hi_res[0]
    # mix with rates from the closed form; the capped-chain rates are reported in the trace
    R_lo = rate_of_threshold(p_s, p_g, T_lo)
    R_hi = rate_of_threshold(p_s, p_g, T_hi)
    if T_lo == T_hi or R_lo == R_hi:
        mixing = 1.0
    else:
        mixing = (R_lo - alpha) / (R_lo - R_hi)
    mixing = min(1.0, max(0.0, mixing))
    rate = mixing * R_hi + (1.0 - mixing) * R_lo
    mean = mixing * hi_res[2] + (1.0 - mixing) * lo_res[2]
    return CmdpSolution(0.5 * (lo + hi), T_lo, T_hi, mixing, rate, mean, delta_max, tuple(trace))
