"""Relay-chain results: relaying delay, versions generated in transit, and the
average VAoI at the end of an N-relay line."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln
from scipy.stats import nbinom, norm

from .core import DEFAULT_TOL, MultiHopTopology, Pmf, _check_prob, geometric_cutoff, geometric_tail

__all__ = [
    "RelayDelayLaw",
    "tau_pmf_convolution",
    "tau_pmf_negbin",
    "tau_normal_approx",
    "tau_normal_pmf",
    "beta_mean",
    "dest_mean",
]

_LOG_SPACE_ABOVE = 50


@dataclass(frozen=True)
class RelayDelayLaw:
    """Law of the total relaying delay. ``pmf[k]`` is P(tau = N + k)."""

    N: int
    pmf: Pmf
    mean: float
    variance: float
    method: str

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.N, self.N + len(self.pmf))

    def absolute_pmf(self) -> Pmf:
        """The same law indexed by tau itself (zeros below N)."""
        probs = np.concatenate([np.zeros(self.N), self.pmf.probs])
        return Pmf(probs, self.pmf.tail_bound)

    def prob(self, ell: int) -> float:
        k = ell - self.N
        return 0.0 if k < 0 else float(self.pmf[k])


def _moments(rho):
    rho = np.asarray(rho, dtype=float)
    return float(np.sum(1.0 / rho)), float(np.sum((1.0 - rho) / rho**2))


def _geometric_shifted(rho, tol):
    """P(m - 1 = k) = (1 - rho)^k rho, truncated so the dropped tail < tol."""
    if rho == 1.0:
        return np.array([1.0]), 0.0
    K = geometric_cutoff(rho, 1.0 - rho, tol)
    return rho * (1.0 - rho) ** np.arange(K), geometric_tail(rho, 1.0 - rho, K)


def tau_pmf_convolution(topology: MultiHopTopology, tol: float = DEFAULT_TOL) -> RelayDelayLaw:
    """Delay law as the convolution of the per-link geometric laws."""
    N = topology.N
    if N < 1:
        raise ValueError("need at least one relay link")
    probs = np.array([1.0])
    log_kept = 0.0
    for rho in topology.rho:
        g, tail = _geometric_shifted(rho, tol / N)
        probs = np.convolve(probs, g)
        log_kept += math.log1p(-tail)
    missing = -math.expm1(log_kept)
    mean, var = _moments(topology.rho)
    return RelayDelayLaw(N, Pmf(probs, missing), mean, var, "convolution")


def _negbin_log_pmf(k, N, rho):
    """log P(tau = N + k) = log C(N + k - 1, N - 1) + N log rho + k log(1 - rho)."""
    k = np.asarray(k, dtype=float)
    if N > _LOG_SPACE_ABOVE:
        log_coef = gammaln(N + k) - gammaln(N) - gammaln(k + 1)
    else:
        log_coef = np.log(np.array([math.comb(N + int(j) - 1, N - 1) for j in k], dtype=float))
    return log_coef + N * math.log(rho) + k * math.log1p(-rho)


def tau_pmf_negbin(N: int, rho: float, tol: float = DEFAULT_TOL) -> RelayDelayLaw:
    """Closed-form delay law for N identical links."""
    if int(N) != N or N < 1:
        raise ValueError("N must be a positive integer")
    N = int(N)
    rho = _check_prob("rho", rho, open_low=True)
    mean, var = N / rho, N * (1.0 - rho) / rho**2
    if rho == 1.0:
        return RelayDelayLaw(N, Pmf.point_mass(0), mean, var, "negative-binomial")
    # nbinom counts failures before the N-th success, i.e. tau - N
    K = int(nbinom.isf(tol, N, rho)) + 1
    while nbinom.sf(K - 1, N, rho) >= tol:
        K += 1
    probs = np.exp(_negbin_log_pmf(np.arange(K), N, rho))
    tail = float(nbinom.sf(K - 1, N, rho))
    return RelayDelayLaw(N, Pmf(probs, tail), mean, var, "negative-binomial")


def tau_normal_approx(topology: MultiHopTopology) -> tuple:
    """(mean, variance) of the central-limit approximation."""
    if topology.N < 1:
        raise ValueError("need at least one relay link")
    return _moments(topology.rho)


def tau_normal_pmf(topology: MultiHopTopology, support) -> np.ndarray:
    """Normal approximation binned on integers: P(l - 1/2 < X <= l + 1/2)."""
    mean, var = tau_normal_approx(topology)
    ell = np.asarray(support, dtype=float)
    if var == 0.0:
        return (ell == mean).astype(float)
    sd = math.sqrt(var)
    return norm.cdf((ell + 0.5 - mean) / sd) - norm.cdf((ell - 0.5 - mean) / sd)


def beta_mean(topology: MultiHopTopology, p_g: float) -> float:
    """Expected number of source versions generated while a version is relayed."""
    p_g = _check_prob("p_g", p_g)
    if topology.N == 0:
        return 0.0
    return p_g * float(np.sum(1.0 / np.asarray(topology.rho)))


def dest_mean(mean_node1: float, topology: MultiHopTopology, p_g: float) -> float:
    """Average VAoI N + 1 hops from the source given the first node's average."""
    if mean_node1 < 0:
        raise ValueError("mean_node1 must be nonnegative")
    return mean_node1 + beta_mean(topology, p_g)
