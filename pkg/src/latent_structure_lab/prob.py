"""Exact categorical arithmetic on small discrete outcome spaces.

Conventions used by every module in this package:

- A bit-pattern over V variables is an integer in [0, 2**V); variable 0 is
  the most significant bit, so the ordered bit reading (1, 1, 0) denotes
  outcome 6.
- Likelihoods are computed in log space (natural log, nats); probabilities
  are only exponentiated when a normalized distribution is emitted.
- Values are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

# Largest V for which a 2**V joint table may be materialized.
MAX_JOINT_BITS = 20

WEIGHT_SUM_TOL = 1e-12


class CapacityError(ValueError):
    """An outcome table was requested that this package refuses to build."""


def _read_only(values, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Categorical:
    """Probability vector over K discrete outcomes."""

    weights: np.ndarray

    def __post_init__(self) -> None:
        w = _read_only(self.weights)
        if w.ndim != 1 or w.size < 1:
            raise ValueError("weights must be a non-empty 1-d vector")
        if np.any(w < 0.0):
            raise ValueError("weights must be nonnegative")
        total = float(w.sum())
        if not math.isfinite(total) or abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights must sum to 1 (got {total!r})")
        object.__setattr__(self, "weights", w)

    @property
    def k(self) -> int:
        return int(self.weights.size)

    @staticmethod
    def uniform(k: int) -> "Categorical":
        if k < 1:
            raise ValueError("k must be >= 1")
        return Categorical(np.full(k, 1.0 / k))

    @staticmethod
    def normalized(values) -> "Categorical":
        """Build from nonnegative weights, rescaling them to sum to 1."""
        arr = np.asarray(values, dtype=np.float64)
        total = float(arr.sum())
        if total <= 0.0 or not math.isfinite(total):
            raise ValueError("weights must have a positive finite sum")
        return Categorical(arr / total)

    def to_list(self) -> list[float]:
        return [float(x) for x in self.weights]


@dataclass(frozen=True, eq=False)
class TallyVector:
    """Outcome counts over K outcomes; the sufficient statistic everywhere.

    Counts are stored as float64 so that responsibility-weighted (fractional)
    tallies share the type; integer tallies stay exact up to 2**53.
    """

    counts: np.ndarray
    total: float = None  # type: ignore[assignment]  # derived in __post_init__

    def __post_init__(self) -> None:
        c = _read_only(self.counts)
        if c.ndim != 1 or c.size < 1:
            raise ValueError("counts must be a non-empty 1-d vector")
        if np.any(c < 0.0) or not np.all(np.isfinite(c)):
            raise ValueError("counts must be finite and nonnegative")
        object.__setattr__(self, "counts", c)
        object.__setattr__(self, "total", float(c.sum()))

    @property
    def k(self) -> int:
        return int(self.counts.size)

    @staticmethod
    def zeros(k: int) -> "TallyVector":
        return TallyVector(np.zeros(k))

    @staticmethod
    def from_outcomes(outcomes, k: int) -> "TallyVector":
        return TallyVector(np.bincount(np.asarray(outcomes, dtype=np.int64), minlength=k))

    def to_list(self) -> list[float]:
        return [float(x) for x in self.counts]


@dataclass(frozen=True)
class Grouping:
    """Ordered partition of variables 0..V-1 into G ordered groups of size S.

    Slot order matters: within a group, the first listed variable supplies
    the most significant bit of that group's outcome index.
    """

    slots: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        groups = tuple(tuple(int(i) for i in grp) for grp in self.slots)
        if not groups or not groups[0]:
            raise ValueError("grouping must contain at least one non-empty group")
        size = len(groups[0])
        if any(len(grp) != size for grp in groups):
            raise ValueError("all groups must have the same size")
        flat = [i for grp in groups for i in grp]
        v = len(flat)
        if sorted(flat) != list(range(v)):
            raise ValueError("groups must cover each variable index exactly once")
        object.__setattr__(self, "slots", groups)

    @property
    def v(self) -> int:
        return sum(len(grp) for grp in self.slots)

    @property
    def g(self) -> int:
        return len(self.slots)

    @property
    def s(self) -> int:
        return len(self.slots[0])

    @staticmethod
    def identity(v: int, s: int) -> "Grouping":
        if v % s:
            raise ValueError("s must divide v")
        return Grouping(tuple(tuple(range(j, j + s)) for j in range(0, v, s)))


def kl_divergence(p: Categorical, q: Categorical) -> float:
    """KL(p || q) in nats, with 0 * ln(0/q) = 0.

    Unsupported mass (p_j > 0 where q_j = 0) yields +inf, which is a value
    and not an error: unsmoothed empirical estimates may legitimately be
    compared early in a run.
    """
    if p.k != q.k:
        raise ValueError(f"dimension mismatch: {p.k} vs {q.k}")
    mask = p.weights > 0.0
    pw = p.weights[mask]
    qw = q.weights[mask]
    if np.any(qw == 0.0):
        return math.inf
    return float(np.dot(pw, np.log(pw) - np.log(qw)))


def log_likelihood(t: TallyVector, q: Categorical) -> float:
    """Sum of counts_j * ln(q_j); -inf when data sits on a zero of q."""
    if t.k != q.k:
        raise ValueError(f"dimension mismatch: {t.k} vs {q.k}")
    mask = t.counts > 0.0
    qw = q.weights[mask]
    if np.any(qw == 0.0):
        return -math.inf
    return float(np.dot(t.counts[mask], np.log(qw)))


def dirichlet_mean(t: TallyVector, pseudocount: float = 1.0) -> Categorical:
    """Posterior mean under a symmetric Dirichlet prior with the given pseudocount."""
    if not pseudocount > 0.0:
        raise ValueError("pseudocount must be positive")
    return Categorical((t.counts + pseudocount) / (t.total + t.k * pseudocount))


def _check_joint_capacity(v: int) -> None:
    if v > MAX_JOINT_BITS:
        raise CapacityError(f"refusing to build a 2**{v} joint table (limit 2**{MAX_JOINT_BITS})")


def joint_from_independent_bits(bit_probs: Sequence[float]) -> Categorical:
    """Joint over 2**V patterns for V independent bits (variable 0 = MSB)."""
    probs = [float(p) for p in bit_probs]
    v = len(probs)
    if v < 1:
        raise ValueError("need at least one bit probability")
    _check_joint_capacity(v)
    if any(p < 0.0 or p > 1.0 for p in probs):
        raise ValueError("bit probabilities must lie in [0, 1]")
    joint = np.ones(1)
    for p in probs:
        joint = np.kron(joint, np.array([1.0 - p, p]))
    return Categorical(joint)


def group_outcomes(patterns, grouping: Grouping) -> np.ndarray:
    """Project bit-patterns onto each group, MSB-first per slot order.

    Returns an (N, G) integer array of group outcomes in [0, 2**S).
    """
    v = grouping.v
    arr = np.asarray(patterns, dtype=np.int64)
    out = np.empty((arr.size, grouping.g), dtype=np.int64)
    for j, grp in enumerate(grouping.slots):
        idx = np.zeros(arr.size, dtype=np.int64)
        for var in grp:
            idx = (idx << 1) | ((arr >> (v - 1 - var)) & 1)
        out[:, j] = idx
    return out


def joint_from_grouping(grouping: Grouping, group_dists: Sequence[Categorical]) -> Categorical:
    """Joint over 2**V implied by per-group distributions on a grouping."""
    v = grouping.v
    _check_joint_capacity(v)
    if len(group_dists) != grouping.g:
        raise ValueError(f"expected {grouping.g} group distributions, got {len(group_dists)}")
    cell = 1 << grouping.s
    for dist in group_dists:
        if dist.k != cell:
            raise ValueError(f"group distributions must have {cell} outcomes")
    outcomes = group_outcomes(np.arange(1 << v, dtype=np.int64), grouping)
    joint = np.ones(1 << v)
    for j, dist in enumerate(group_dists):
        joint *= dist.weights[outcomes[:, j]]
    return Categorical(joint)


def total_variation(p: Categorical, q: Categorical) -> float:
    if p.k != q.k:
        raise ValueError(f"dimension mismatch: {p.k} vs {q.k}")
    return 0.5 * float(np.abs(p.weights - q.weights).sum())
