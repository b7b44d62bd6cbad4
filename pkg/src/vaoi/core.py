"""Domain types and PMF helpers shared across the package.

All containers are frozen dataclasses; PMF arrays are copied on construction
and marked read-only so instances can be shared freely between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

DEFAULT_TOL = 1e-12
NORMALIZATION_SLACK = 1e-9


class ParameterError(ValueError):
    """Raised when a parameter is outside its admissible range."""

    def __init__(self, name: str, message: str):
        super().__init__(message)
        self.name = name


def _check_prob(name, value, *, open_low=False):
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ParameterError(name, f"{name} must be a real number, got {value!r}") from None
    if math.isnan(value):
        raise ParameterError(name, f"{name} must not be NaN")
    if open_low:
        if not 0.0 < value <= 1.0:
            raise ParameterError(name, f"{name} must be in (0,1], got {value}")
    elif not 0.0 <= value <= 1.0:
        raise ParameterError(name, f"{name} must be in [0,1], got {value}")
    return value


@dataclass(frozen=True)
class SystemParams:
    """First-link success ``p_s``, per-slot version generation ``p_g`` and
    the update-rate budget ``alpha``."""

    p_s: float
    p_g: float
    alpha: float = 1.0

    def __post_init__(self):
        validate_params(self)

    @property
    def ratio(self) -> float:
        return self.p_g / self.p_s


def validate_params(params: SystemParams) -> SystemParams:
    """Return ``params`` unchanged, or raise :class:`ParameterError` naming the
    offending field."""
    _check_prob("p_s", params.p_s, open_low=True)
    _check_prob("p_g", params.p_g)
    _check_prob("alpha", params.alpha, open_low=True)
    return params


@dataclass(frozen=True)
class MultiHopTopology:
    """Relay links 1..N; link 0 (source to node 1) is ``SystemParams.p_s``."""

    rho: tuple = ()

    def __post_init__(self):
        rho = tuple(_check_prob(f"rho[{i}]", r, open_low=True) for i, r in enumerate(self.rho))
        object.__setattr__(self, "rho", rho)

    @property
    def N(self) -> int:
        return len(self.rho)

    @classmethod
    def uniform(cls, N: int, rho: float) -> "MultiHopTopology":
        if N < 0:
            raise ParameterError("N", f"N must be >= 0, got {N}")
        return cls((rho,) * N)

    def __add__(self, other: "MultiHopTopology") -> "MultiHopTopology":
        return MultiHopTopology(self.rho + other.rho)


# --------------------------------------------------------------------------
# update policies

@dataclass(frozen=True)
class RandomizedStationary:
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", _check_prob("alpha", self.alpha, open_low=True))


@dataclass(frozen=True)
class Uniform:
    """Transmit at slots 0, D, 2D, ..."""

    D: int

    def __post_init__(self):
        if int(self.D) != self.D or self.D < 1:
            raise ParameterError("D", f"D must be a positive integer, got {self.D}")
        object.__setattr__(self, "D", int(self.D))

    @classmethod
    def from_rate(cls, alpha: float) -> "Uniform":
        return cls(uniform_period(alpha))


@dataclass(frozen=True)
class Threshold:
    """Transmit whenever the receiver's VAoI is at least ``delta_T``."""

    delta_T: int

    def __post_init__(self):
        if int(self.delta_T) != self.delta_T or self.delta_T < 0:
            raise ParameterError("delta_T", f"delta_T must be a nonnegative integer, got {self.delta_T}")
        object.__setattr__(self, "delta_T", int(self.delta_T))


MIXING_MODES = ("choose-once", "per-slot")


@dataclass(frozen=True)
class MixedThreshold:
    """Threshold ``delta_T_star`` w.p. ``gamma``, else ``delta_T_star - 1``.

    ``choose-once`` draws the threshold once per run; ``per-slot`` redraws it
    every slot.
    """

    delta_T_star: int
    gamma: float
    mixing_mode: str = "choose-once"

    def __post_init__(self):
        if int(self.delta_T_star) != self.delta_T_star or self.delta_T_star < 1:
            raise ParameterError(
                "delta_T_star", f"delta_T_star must be a positive integer, got {self.delta_T_star}"
            )
        object.__setattr__(self, "delta_T_star", int(self.delta_T_star))
        object.__setattr__(self, "gamma", _check_prob("gamma", self.gamma))
        if self.mixing_mode not in MIXING_MODES:
            raise ParameterError("mixing_mode", f"mixing_mode must be one of {MIXING_MODES}")


@dataclass(frozen=True)
class Tabular:
    """Explicit action per VAoI state; states past the table reuse the last entry."""

    actions: tuple

    def __post_init__(self):
        acts = tuple(int(a) for a in self.actions)
        if not acts or any(a not in (0, 1) for a in acts):
            raise ParameterError("actions", "actions must be a nonempty sequence of 0/1")
        object.__setattr__(self, "actions", acts)


PolicySpec = Union[RandomizedStationary, Uniform, Threshold, MixedThreshold, Tabular]


def uniform_period(alpha: float) -> int:
    """Largest period D whose rate 1/D stays within ``alpha``: ceil(1/alpha)."""
    alpha = _check_prob("alpha", alpha, open_low=True)
    inv = 1.0 / alpha
    # guard against 1/0.05 == 20.000000000000004
    D = math.ceil(inv - 1e-9 * inv)
    return max(D, 1)


# --------------------------------------------------------------------------
# PMFs

@dataclass(frozen=True)
class Pmf:
    """Truncated PMF over {0, 1, ...}.

    ``tail_bound`` is the probability mass beyond ``len(probs) - 1``. When the
    tail is known to be geometric, ``tail_ratio`` holds its ratio so the mean
    error can be bounded.
    """

    probs: np.ndarray
    tail_bound: float = 0.0
    tail_ratio: float | None = None

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float).reshape(-1)
        if probs.size == 0:
            raise ValueError("Pmf needs at least one entry")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise ValueError("Pmf entries must be finite and nonnegative")
        tail = float(self.tail_bound)
        if tail < 0:
            raise ValueError("tail_bound must be nonnegative")
        total = probs.sum() + tail
        if abs(total - 1.0) > NORMALIZATION_SLACK:
            raise ValueError(f"Pmf mass {total!r} is not 1 within {NORMALIZATION_SLACK}")
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "tail_bound", tail)

    def __len__(self):
        return self.probs.size

    def __getitem__(self, n):
        if isinstance(n, (int, np.integer)) and n >= self.probs.size:
            return 0.0
        return self.probs[n]

    def __eq__(self, other):
        if not isinstance(other, Pmf):
            return NotImplemented
        return self.tail_bound == other.tail_bound and np.array_equal(self.probs, other.probs)

    __hash__ = None

    @classmethod
    def point_mass(cls, n: int = 0) -> "Pmf":
        probs = np.zeros(n + 1)
        probs[n] = 1.0
        return cls(probs)

    @classmethod
    def from_counts(cls, counts) -> "Pmf":
        counts = np.asarray(counts, dtype=float)
        return cls(counts / counts.sum())

    def padded(self, length: int) -> np.ndarray:
        out = np.zeros(max(length, self.probs.size))
        out[: self.probs.size] = self.probs
        return out

    @property
    def mean(self) -> float:
        return pmf_mean(self)

    @property
    def mean_error(self) -> float:
        """Upper bound on the mean mass lost to truncation."""
        if self.tail_bound == 0.0:
            return 0.0
        if self.tail_ratio is None or self.tail_ratio >= 1.0:
            return math.inf
        r = self.tail_ratio
        return self.tail_bound * (len(self) + r / (1.0 - r))


def pmf_mean(pmf: Pmf) -> float:
    """Mean over the truncated support; see :attr:`Pmf.mean_error` for the tail."""
    n = np.arange(len(pmf))
    return float(n @ pmf.probs)


def pmf_total_variation(a: Pmf, b: Pmf) -> float:
    """Half L1 distance on the union support plus half of both tail bounds."""
    L = max(len(a), len(b))
    tv = 0.5 * float(np.abs(a.padded(L) - b.padded(L)).sum())
    return tv + 0.5 * (a.tail_bound + b.tail_bound)


def pmf_tail_mass(pmf: Pmf, threshold: int) -> float:
    """P(X >= threshold), counting the unresolved tail as mass."""
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    return float(pmf.probs[threshold:].sum()) + pmf.tail_bound


def mix_pmfs(weights: Sequence[float], pmfs: Sequence[Pmf]) -> Pmf:
    L = max(len(p) for p in pmfs)
    probs = sum(w * p.padded(L) for w, p in zip(weights, pmfs))
    tail = sum(w * p.tail_bound for w, p in zip(weights, pmfs))
    ratios = [p.tail_ratio for p in pmfs if p.tail_bound > 0]
    ratio = None if any(r is None for r in ratios) else max(ratios, default=None)
    return Pmf(probs, tail, ratio)


def geometric_cutoff(head: float, ratio: float, tol: float) -> int:
    """Number of terms of ``head * ratio**k`` to keep so the dropped tail
    ``head * ratio**K / (1 - ratio)`` falls below ``tol``. Always at least 1."""
    if head <= 0:
        return 1
    if ratio <= 0:
        return 1
    K = math.log(tol * (1.0 - ratio) / head) / math.log(ratio)
    K = max(1, math.ceil(K))
    while head * ratio**K / (1.0 - ratio) >= tol:
        K += 1
    return K


def geometric_tail(head: float, ratio: float, K: int) -> float:
    if head <= 0 or ratio <= 0:
        return 0.0
    return head * ratio**K / (1.0 - ratio)
