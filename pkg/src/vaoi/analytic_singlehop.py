"""Closed-form VAoI laws for a single erasure link.

Three update policies are covered: randomized stationary (transmit w.p.
alpha each slot), uniform (every D slots) and threshold (transmit while the
receiver lags by at least delta_T versions), plus the rate-optimal mixture of
two adjacent thresholds.

Functions that do not depend on the rate budget take ``p_s, p_g`` directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.stats import binom

from .core import (
    DEFAULT_TOL,
    MixedThreshold,
    Pmf,
    SystemParams,
    _check_prob,
    geometric_cutoff,
    geometric_tail,
    mix_pmfs,
    pmf_mean,
)

__all__ = [
    "ThresholdSolution",
    "RateRequirement",
    "InfeasibleTargetError",
    "stationary_rs",
    "mean_rs",
    "phase_chains_uniform",
    "stationary_uniform",
    "mean_uniform",
    "stationary_threshold",
    "mean_threshold",
    "rate_of_threshold",
    "optimal_threshold",
    "stationary_optimal",
    "required_rate",
    "rs_transition_matrix",
    "threshold_transition_matrix",
    "uniform_phase_matrix",
    "balance_residual",
]

BISECTION_TOL = 1e-9
BISECTION_MAX_ITER = 200
_MAX_STATES = 2_000_000


class InfeasibleTargetError(ValueError):
    """No update rate in (0, 1] reaches the requested mean VAoI."""

    def __init__(self, family, target, floor):
        super().__init__(
            f"target mean {target} is below the minimum achievable {floor} for policy family {family!r}"
        )
        self.family = family
        self.target = target
        self.floor = floor


def _link(p_s, p_g):
    return _check_prob("p_s", p_s, open_low=True), _check_prob("p_g", p_g)


def _geometric_pmf(head_values, seg_head, ratio, tol):
    """Concatenate explicit leading values with a geometric segment."""
    K = geometric_cutoff(seg_head, ratio, tol)
    seg = seg_head * ratio ** np.arange(K)
    tail = geometric_tail(seg_head, ratio, K)
    return Pmf(np.concatenate([head_values, seg]), tail, ratio if tail > 0 else None)


# --------------------------------------------------------------------------
# randomized stationary

def stationary_rs(params: SystemParams, tol: float = DEFAULT_TOL) -> Pmf:
    """Stationary VAoI law when each slot transmits independently w.p. alpha.

    Successful delivery happens w.p. ``alpha * p_s`` per slot. For n >= 1 the
    law is geometric with ratio ``(1 - alpha p_s) p_g / beta`` where
    ``beta = 1 - (1 - alpha p_s)(1 - p_g)``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    p_s, p_g, alpha = params.p_s, params.p_g, params.alpha
    if p_g == 0.0:
        return Pmf.point_mass(0)
    q = alpha * p_s
    beta = 1.0 - (1.0 - q) * (1.0 - p_g)
    mu0 = q * (1.0 - p_g) / beta
    mu1 = q * p_g / beta**2
    r = (1.0 - q) * p_g / beta
    return _geometric_pmf([mu0], mu1, r, tol)


def _decimal(x: float) -> Fraction:
    # the shortest decimal that round-trips to x, read as an exact rational
    return Fraction(repr(float(x)))


def mean_rs(params: SystemParams) -> float:
    """``p_g / (alpha p_s)``, evaluated exactly on the decimal inputs and
    rounded once, so e.g. (0.8, 0.3, 0.25) gives 1.5 rather than 1.4999..."""
    return float(_decimal(params.p_g) / (_decimal(params.alpha) * _decimal(params.p_s)))


# --------------------------------------------------------------------------
# uniform

def _binom_row(n, p_g):
    return binom.pmf(np.arange(n + 1), n, p_g)


def _phase_chain(p_s, p_g, D, q, tol):
    bD = _binom_row(D, p_g)
    bq = _binom_row(q, p_g)
    beta = 1.0 - (1.0 - p_s) * bD[0]
    fail = (1.0 - p_s) * bD[1:]  # weight of lag i = 1..D

    mu = np.zeros(max(64, 4 * D))
    mu[0] = p_s * bq[0] / beta
    total = mu[0]
    n = 0
    while 1.0 - total >= tol:
        n += 1
        if n >= mu.size:
            if n > _MAX_STATES:
                raise RuntimeError("uniform-policy recursion did not reach the tolerance")
            mu = np.concatenate([mu, np.zeros(mu.size)])
        k = min(n, D)
        acc = float(np.dot(fail[:k], mu[n - k : n][::-1]))
        if n <= q:
            acc += p_s * bq[n]
        mu[n] = acc / beta
        total += mu[n]
    return Pmf(mu[: n + 1], max(0.0, 1.0 - total))


def phase_chains_uniform(p_s: float, p_g: float, D: int, tol: float = DEFAULT_TOL) -> list:
    """Stationary laws of the D-step chains ``Delta(kD + q)``, q = 1..D."""
    p_s, p_g = _link(p_s, p_g)
    if int(D) != D or D < 1:
        raise ValueError("D must be a positive integer")
    D = int(D)
    if p_g == 0.0:
        return [Pmf.point_mass(0) for _ in range(D)]
    return [_phase_chain(p_s, p_g, D, q, tol) for q in range(1, D + 1)]


def stationary_uniform(p_s: float, p_g: float, D: int, tol: float = DEFAULT_TOL) -> Pmf:
    """Long-run occupancy under the uniform policy: average of the D phase laws."""
    chains = phase_chains_uniform(p_s, p_g, D, tol)
    return mix_pmfs([1.0 / len(chains)] * len(chains), chains)


def mean_uniform(p_s: float, p_g: float, D: int, tol: float = DEFAULT_TOL) -> float:
    return pmf_mean(stationary_uniform(p_s, p_g, D, tol))


# --------------------------------------------------------------------------
# threshold

def _thr_beta(p_s, p_g):
    return 1.0 - (1.0 - p_s) * (1.0 - p_g)


def stationary_threshold(p_s: float, p_g: float, delta_T: int, tol: float = DEFAULT_TOL) -> Pmf:
    """Stationary VAoI law under the threshold policy.

    Thresholds 0 and 1 give the always-update chain. For delta_T >= 2 the law
    is flat on 1..delta_T-1, drops by ``p_g / beta`` at delta_T and decays
    geometrically with ratio ``(1 - p_s) p_g / beta`` afterwards.

    With ``p_g == 0`` the chain never leaves 0 and a point mass is returned.
    """
    p_s, p_g = _link(p_s, p_g)
    if int(delta_T) != delta_T or delta_T < 0:
        raise ValueError("delta_T must be a nonnegative integer")
    delta_T = int(delta_T)
    if p_g == 0.0:
        return Pmf.point_mass(0)
    if delta_T <= 1:
        return stationary_rs(SystemParams(p_s, p_g, 1.0), tol)
    beta = _thr_beta(p_s, p_g)
    denom = (delta_T - 1) * p_s + beta
    plateau = p_s / denom
    head = np.empty(delta_T)
    head[0] = p_s * (1.0 - p_g) / denom
    head[1:] = plateau
    r = (1.0 - p_s) * p_g / beta
    return _geometric_pmf(head, p_g / beta * plateau, r, tol)


def mean_threshold(p_s: float, p_g: float, delta_T: int) -> float:
    p_s, p_g = _link(p_s, p_g)
    if delta_T < 0:
        raise ValueError("delta_T must be nonnegative")
    if p_g == 0.0:
        return 0.0
    if delta_T <= 1:
        return p_g / p_s
    denom = (delta_T - 1) * p_s + _thr_beta(p_s, p_g)
    return 0.5 * (delta_T - 1) * delta_T * p_s / denom + p_g / p_s


def rate_of_threshold(p_s: float, p_g: float, delta_T: int) -> float:
    """Long-run fraction of transmitting slots, i.e. P(Delta >= delta_T)."""
    p_s, p_g = _link(p_s, p_g)
    if delta_T < 0:
        raise ValueError("delta_T must be nonnegative")
    if delta_T == 0:
        return 1.0
    return p_g / ((delta_T - 1) * p_s + _thr_beta(p_s, p_g))


@dataclass(frozen=True)
class ThresholdSolution:
    delta_T_star: int
    gamma: float
    mean_vaoi: float
    rate_achieved: float

    @property
    def policy(self) -> MixedThreshold:
        return MixedThreshold(self.delta_T_star, self.gamma)


def optimal_threshold(params: SystemParams) -> ThresholdSolution:
    """Rate-optimal mixture of thresholds ``delta_T_star`` (w.p. gamma) and
    ``delta_T_star - 1`` that meets the budget alpha with equality.

    When the always-update chain already fits the budget, delta_T_star is 1 and
    the mixture partner is threshold 0; both share the same VAoI law, so the
    mean is unaffected and only idle transmissions at state 0 are added.
    """
    p_s, p_g, alpha = params.p_s, params.p_g, params.alpha
    x = (p_g / p_s) * (1.0 / alpha - 1.0 + p_s)
    T = max(1, math.ceil(x))
    # ceil() on a float that should be an exact integer
    while T > 1 and rate_of_threshold(p_s, p_g, T - 1) <= alpha * (1 + 1e-12):
        T -= 1
    while rate_of_threshold(p_s, p_g, T) > alpha * (1 + 1e-12):
        T += 1

    r_hi = rate_of_threshold(p_s, p_g, T - 1)
    r_lo = rate_of_threshold(p_s, p_g, T)
    if r_lo < alpha and r_hi > r_lo:
        gamma = (r_hi - alpha) / (r_hi - r_lo)
    else:
        gamma = 1.0
    gamma = min(1.0, max(0.0, gamma))
    mean = gamma * mean_threshold(p_s, p_g, T) + (1.0 - gamma) * mean_threshold(p_s, p_g, T - 1)
    rate = gamma * r_lo + (1.0 - gamma) * r_hi
    return ThresholdSolution(T, gamma, mean, rate)


def stationary_optimal(params: SystemParams, tol: float = DEFAULT_TOL) -> Pmf:
    """Occupancy law of the choose-once optimal mixed threshold policy."""
    sol = optimal_threshold(params)
    return mix_pmfs(
        [sol.gamma, 1.0 - sol.gamma],
        [
            stationary_threshold(params.p_s, params.p_g, sol.delta_T_star, tol),
            stationary_threshold(params.p_s, params.p_g, sol.delta_T_star - 1, tol),
        ],
    )


# --------------------------------------------------------------------------
# rate needed for a target mean

@dataclass(frozen=True)
class RateRequirement:
    """Smallest update rate whose policy family meets ``target`` mean VAoI.

    ``interval`` brackets the requirement: for ``rs`` it is degenerate, for
    ``threshold`` it is the final bisection bracket, and for ``uniform`` it is
    ``(1/(D+1), 1/D)`` where D is the longest period meeting the target.
    ``interpolated`` is only set for ``uniform``: the rate at which the mean,
    linearly interpolated between integer periods, crosses the target.
    """

    family: str
    target: float
    rate: float
    interval: tuple
    period: int | None = None
    interpolated: float | None = None


FAMILIES = ("rs", "uniform", "threshold")


def required_rate(family: str, p_s: float, p_g: float, target: float) -> RateRequirement:
    p_s, p_g = _link(p_s, p_g)
    if family not in FAMILIES:
        raise ValueError(f"family must be one of {FAMILIES}, got {family!r}")
    floor = p_g / p_s
    if target < floor * (1 - 1e-12):
        raise InfeasibleTargetError(family, target, floor)
    if p_g == 0.0:
        # every rate gives mean 0; report the infimum
        return RateRequirement(family, target, 0.0, (0.0, 0.0))

    if family == "rs":
        rate = min(1.0, p_g / (p_s * target))
        return RateRequirement(family, target, rate, (rate, rate))

    if family == "threshold":
        def meets(a):
            return optimal_threshold(SystemParams(p_s, p_g, a)).mean_vaoi <= target * (1 + 1e-12)

        hi = 1.0
        lo = min(1.0, p_g / (4.0 * p_s * target))
        while meets(lo):
            lo /= 2.0
            if lo < 1e-300:
                raise RuntimeError("could not bracket the required rate")
        for _ in range(BISECTION_MAX_ITER):
            if hi - lo <= BISECTION_TOL:
                break
            mid = 0.5 * (lo + hi)
            if meets(mid):
                hi = mid
            else:
                lo = mid
        return RateRequirement(family, target, hi, (lo, hi))

    # uniform: the mean grows with the period, step D up until it overshoots
    D = 1
    m_prev = mean_uniform(p_s, p_g, 1)
    while True:
        m_next = mean_uniform(p_s, p_g, D + 1)
        if m_next > target:
            break
        D += 1
        m_prev = m_next
        if D > 10**6:
            raise RuntimeError("uniform period search did not terminate")
    frac = (target - m_prev) / (m_next - m_prev)
    interp = 1.0 / (D + frac)
    return RateRequirement(family, target, 1.0 / D, (1.0 / (D + 1), 1.0 / D), D, interp)


# --------------------------------------------------------------------------
# explicit transition matrices on {0..size-1} (no boundary correction)

def rs_transition_matrix(params: SystemParams, size: int) -> np.ndarray:
    return _reset_chain(params.p_s * params.alpha, params.p_g, np.ones(size, dtype=bool))


def threshold_transition_matrix(p_s: float, p_g: float, delta_T: int, size: int) -> np.ndarray:
    p_s, p_g = _link(p_s, p_g)
    return _reset_chain(p_s, p_g, np.arange(size) >= delta_T)


def _reset_chain(q, p_g, transmit):
    size = transmit.size
    P = np.zeros((size, size))
    for j in range(size):
        s = q if transmit[j] else 0.0
        P[j, 0] += s * (1 - p_g)
        if size > 1:
            P[j, 1] += s * p_g
        P[j, j] += (1 - s) * (1 - p_g)
        if j + 1 < size:
            P[j, j + 1] += (1 - s) * p_g
    return P


def uniform_phase_matrix(p_s: float, p_g: float, D: int, q: int, size: int) -> np.ndarray:
    """D-step kernel of ``Delta(kD + q)``: reset then q generations on
    success, D extra generations on failure."""
    p_s, p_g = _link(p_s, p_g)
    bD = _binom_row(D, p_g)
    bq = _binom_row(q, p_g)
    P = np.zeros((size, size))
    m = min(q + 1, size)
    P[:, :m] += p_s * bq[:m]
    for j in range(size):
        k = min(D + 1, size - j)
        P[j, j : j + k] += (1 - p_s) * bD[:k]
    return P


def balance_residual(pmf: Pmf, P: np.ndarray) -> float:
    """max_n |mu_n - sum_j P_jn mu_j| over the support of ``P``."""
    size = P.shape[0]
    mu = pmf.padded(size)[:size]
    return float(np.max(np.abs(mu - mu @ P)))
