"""Slotted Monte Carlo simulation of VAoI along a source -> relays -> sink line.

Each slot: the first link's action is taken from the start-of-slot state,
every link draws its erasure outcome, the source draws a new version, and
all nodes update simultaneously from the slot-``t`` versions.

Replication ``r`` draws from its own stream seeded by ``(master_seed, r)``,
so results do not depend on how replications are batched or scheduled.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import (
    MixedThreshold,
    MultiHopTopology,
    Pmf,
    RandomizedStationary,
    SystemParams,
    Tabular,
    Threshold,
    Uniform,
)

__all__ = ["SimConfig", "SimResult", "simulate_singlehop", "simulate_multihop", "empirical_tau", "replication_rng"]

SEED_SCHEME = "numpy SeedSequence(master_seed, spawn_key=(r,)) -> PCG64"


@dataclass(frozen=True)
class SimConfig:
    horizon_T: int = 10_000
    replications: int = 400
    master_seed: int = 0
    warmup: int = 0
    batch_size: int = 50
    workers: int = 1

    def __post_init__(self):
        for name in ("horizon_T", "replications", "batch_size", "workers"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.warmup < 0:
            raise ValueError("warmup must be >= 0")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class SimResult:
    """Empirical statistics for nodes 1..N+1 (index 0 is node 1).

    ``mean`` and ``stderr`` are across-replication statistics of the
    per-replication time averages; ``rate`` is the fraction of slots in which
    the first link transmitted.
    """

    pmfs: tuple
    mean: np.ndarray
    stderr: np.ndarray
    rate: float
    rate_stderr: float
    replications: int
    horizon_T: int
    master_seed: int
    seed_scheme: str = SEED_SCHEME

    @property
    def nodes(self) -> tuple:
        return tuple(range(1, len(self.pmfs) + 1))

    def pmf(self, node: int = 1) -> Pmf:
        return self.pmfs[node - 1]

    def node_mean(self, node: int = 1) -> float:
        return float(self.mean[node - 1])

    def node_stderr(self, node: int = 1) -> float:
        return float(self.stderr[node - 1])


def replication_rng(master_seed: int, r: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=(r,))))


def _action_fn(policy):
    """Return f(t, delta1, coin, pick) -> bool array of transmit decisions."""
    if isinstance(policy, RandomizedStationary):
        a = policy.alpha
        return lambda t, d, coin, pick: coin < a
    if isinstance(policy, Uniform):
        D = policy.D
        return lambda t, d, coin, pick: np.full(d.shape, t % D == 0)
    if isinstance(policy, Threshold):
        T = policy.delta_T
        return lambda t, d, coin, pick: d >= T
    if isinstance(policy, MixedThreshold):
        hi, lo, g = policy.delta_T_star, policy.delta_T_star - 1, policy.gamma
        if policy.mixing_mode == "choose-once":
            return lambda t, d, coin, pick: d >= np.where(pick < g, hi, lo)
        return lambda t, d, coin, pick: d >= np.where(coin < g, hi, lo)
    if isinstance(policy, Tabular):
        table = np.asarray(policy.actions, dtype=bool)
        last = table.size - 1
        return lambda t, d, coin, pick: table[np.minimum(d, last)]
    raise TypeError(f"unsupported policy {policy!r}")


def _run_batch(params, rho, policy, config, reps, check_invariants):
    N = rho.size
    T_all = config.warmup + config.horizon_T
    B = len(reps)

    # (time, replication, column); columns: generation, policy coin, link 0, relays
    gen = np.empty((T_all, B), dtype=bool)
    coin = np.empty((T_all, B))
    link0 = np.empty((T_all, B), dtype=bool)
    relay = np.empty((T_all, B, N), dtype=bool)
    pick = np.empty(B)
    for b, r in enumerate(reps):
        g = replication_rng(config.master_seed, r)
        pick[b] = g.random()
        u = g.random((T_all, 3 + N))
        gen[:, b] = u[:, 0] < params.p_g
        coin[:, b] = u[:, 1]
        link0[:, b] = u[:, 2] < params.p_s
        relay[:, b, :] = u[:, 3:] < rho

    act = _action_fn(policy)
    vs = np.zeros(B, dtype=np.int64)
    V = np.zeros((B, N + 1), dtype=np.int64)
    hist = np.empty((config.horizon_T, B, N + 1), dtype=np.int32)
    tx = np.zeros(B, dtype=np.int64)

    for t in range(T_all):
        delta = vs[:, None] - V
        a = act(t, delta[:, 0], coin[t], pick)
        if t >= config.warmup:
            hist[t - config.warmup] = delta
            tx += a
        new_V = np.empty_like(V)
        new_V[:, 0] = np.where(a & link0[t], vs, V[:, 0])
        if N:
            new_V[:, 1:] = np.where(relay[t], V[:, :-1], V[:, 1:])
        V = new_V
        vs = vs + gen[t]
        if check_invariants:
            chain = np.concatenate([vs[:, None], V], axis=1)
            assert np.all(np.diff(chain, axis=1) <= 0), "versions must not overtake upstream nodes"

    counts = []
    for j in range(N + 1):
        counts.append(np.bincount(hist[:, :, j].ravel()))
    sums = hist.sum(axis=0, dtype=np.int64)  # (B, N+1), exact
    return counts, sums, tx


def simulate_multihop(
    params: SystemParams,
    topology: MultiHopTopology,
    policy,
    config: SimConfig = SimConfig(),
    check_invariants: bool = False,
) -> SimResult:
    rho = np.asarray(topology.rho, dtype=float)
    R = config.replications
    batches = [range(i, min(i + config.batch_size, R)) for i in range(0, R, config.batch_size)]

    def job(reps):
        return _run_batch(params, rho, policy, config, reps, check_invariants)

    if config.workers > 1 and len(batches) > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            parts = list(pool.map(job, batches))
    else:
        parts = [job(b) for b in batches]

    n_nodes = rho.size + 1
    counts = []
    for j in range(n_nodes):
        L = max(p[0][j].size for p in parts)
        total = np.zeros(L, dtype=np.int64)
        for p in parts:
            total[: p[0][j].size] += p[0][j]
        counts.append(total)
    sums = np.concatenate([p[1] for p in parts], axis=0)
    tx = np.concatenate([p[2] for p in parts])

    T = config.horizon_T
    per_rep = sums / T
    mean = per_rep.mean(axis=0)
    rates = tx / T
    if R > 1:
        stderr = per_rep.std(axis=0, ddof=1) / math.sqrt(R)
        rate_se = float(rates.std(ddof=1) / math.sqrt(R))
    else:
        stderr = np.zeros(n_nodes)
        rate_se = 0.0
    return SimResult(
        pmfs=tuple(Pmf.from_counts(c) for c in counts),
        mean=mean,
        stderr=stderr,
        rate=float(rates.mean()),
        rate_stderr=rate_se,
        replications=R,
        horizon_T=T,
        master_seed=config.master_seed,
    )


def simulate_singlehop(params: SystemParams, policy, config: SimConfig = SimConfig(), **kw) -> SimResult:
    return simulate_multihop(params, MultiHopTopology(()), policy, config, **kw)


def empirical_tau(topology: MultiHopTopology, config: SimConfig = SimConfig(), samples: int | None = None) -> Pmf:
    """Histogram of sampled relaying delays, indexed by the delay itself.

    ``samples`` defaults to ``horizon_T * replications``.
    """
    if topology.N < 1:
        raise ValueError("need at least one relay link")
    n = samples if samples is not None else config.horizon_T * config.replications
    g = np.random.Generator(np.random.PCG64(np.random.SeedSequence(config.master_seed)))
    tau = np.zeros(n, dtype=np.int64)
    for rho in topology.rho:
        tau += g.geometric(rho, size=n)
    return Pmf.from_counts(np.bincount(tau))
