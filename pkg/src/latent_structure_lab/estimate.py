"""The estimator ladder: from raw smoothed tallies to two-type EM clustering.

Every estimator consumes tallies (or raw bit-patterns) and emits smoothed
Categorical estimates. The two-type estimator treats each unit (urn or
variable group) as drawn from one of two shared distributions and uses EM
over soft type responsibilities.

The EM objective recorded in traces is the observed-data log-likelihood
plus the Dirichlet smoothing term matching the M-step's pseudocount. That
is the quantity this EM provably never decreases; the bare data likelihood
can dip when an update trades likelihood against smoothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .prob import Categorical, Grouping, TallyVector, dirichlet_mean, group_outcomes
from .rng import RngState, next_unit


@dataclass(frozen=True)
class EstimatorConfig:
    pseudocount: float = 1.0
    em_tol: float = 1e-9
    em_max_iters: int = 500
    em_restarts: int = 5
    em_init_noise: float = 0.05

    def __post_init__(self) -> None:
        if not (
            self.pseudocount > 0
            and self.em_tol > 0
            and self.em_max_iters > 0
            and self.em_restarts > 0
            and self.em_init_noise >= 0
        ):
            raise ValueError("estimator configuration fields must be positive")


@dataclass(frozen=True, eq=False)
class EmResult:
    """Converged two-type EM state.

    responsibilities[i] = (P(unit i is type a), P(type b)); rows sum to 1.
    log_likelihood and trace record the EM objective described in the
    module docstring; the trace covers the winning restart only.
    """

    q_a: Categorical
    q_b: Categorical
    responsibilities: np.ndarray
    log_likelihood: float
    iterations: int
    restarts_used: int
    trace: tuple[float, ...]

    def to_jsonable(self) -> dict:
        return {
            "q_a": self.q_a.to_list(),
            "q_b": self.q_b.to_list(),
            "responsibilities": [[float(x) for x in row] for row in self.responsibilities],
            "log_likelihood": self.log_likelihood,
            "iterations": self.iterations,
            "restarts_used": self.restarts_used,
            "trace": list(self.trace),
        }


def raw_tally_estimate(tallies: Sequence[TallyVector], cfg: EstimatorConfig) -> list[Categorical]:
    """Independent smoothed estimate per unit; the no-sharing baseline."""
    return [dirichlet_mean(t, cfg.pseudocount) for t in tallies]


def _counts_matrix(tallies: Sequence[TallyVector]) -> np.ndarray:
    if len(tallies) == 0:
        raise ValueError("need at least one tally vector")
    k = tallies[0].k
    if any(t.k != k for t in tallies):
        raise ValueError("all tally vectors must share the same outcome count")
    return np.stack([t.counts for t in tallies])


def _em_objective_and_resp(
    counts: np.ndarray, q_a: Categorical, q_b: Categorical, pseudocount: float
) -> tuple[float, np.ndarray]:
    log_qa = np.log(q_a.weights)
    log_qb = np.log(q_b.weights)
    ll = np.stack([counts @ log_qa, counts @ log_qb], axis=1)  # (N, 2)
    peak = ll.max(axis=1)
    shifted = np.exp(ll - peak[:, None])
    norm = shifted.sum(axis=1)
    obs = float(np.sum(peak + np.log(0.5 * norm)))
    objective = obs + pseudocount * float(log_qa.sum() + log_qb.sum())
    return objective, shifted / norm[:, None]


def _em_m_step(
    counts: np.ndarray, resp: np.ndarray, pseudocount: float
) -> tuple[Categorical, Categorical]:
    pooled_a = TallyVector(resp[:, 0] @ counts)
    pooled_b = TallyVector(resp[:, 1] @ counts)
    return dirichlet_mean(pooled_a, pseudocount), dirichlet_mean(pooled_b, pseudocount)


def _em_run(
    counts: np.ndarray, q_a: Categorical, q_b: Categorical, cfg: EstimatorConfig
) -> tuple[Categorical, Categorical, np.ndarray, float, int, list[float]]:
    trace: list[float] = []
    prev = None
    resp = None
    objective = -math.inf
    for _ in range(cfg.em_max_iters):
        objective, resp = _em_objective_and_resp(counts, q_a, q_b, cfg.pseudocount)
        trace.append(objective)
        if prev is not None and abs(objective - prev) < cfg.em_tol:
            break
        prev = objective
        q_a, q_b = _em_m_step(counts, resp, cfg.pseudocount)
    else:
        # Ran out of iterations after an M-step; sync responsibilities.
        objective, resp = _em_objective_and_resp(counts, q_a, q_b, cfg.pseudocount)
        trace.append(objective)
    return q_a, q_b, resp, objective, len(trace), trace


def _perturbed(pooled: Categorical, noise: float, rng: RngState) -> tuple[Categorical, RngState]:
    factors = []
    for _ in range(pooled.k):
        u, rng = next_unit(rng)
        factors.append(1.0 + noise * (2.0 * u - 1.0))
    return Categorical.normalized(pooled.weights * np.asarray(factors)), rng


def em_two_type(
    tallies: Sequence[TallyVector],
    cfg: EstimatorConfig,
    seed: int,
    init_responsibilities: np.ndarray | None = None,
) -> EmResult:
    """Two-type EM over per-unit tallies.

    E-step: unit responsibilities from the type likelihoods under a uniform
    1/2 class prior (log-sum-exp). M-step: each type's distribution is the
    smoothed mean of the responsibility-weighted pooled tallies.

    Runs cfg.em_restarts initializations (the pooled distribution with
    multiplicative noise, renormalized) and keeps the best final objective;
    ties go to the earliest restart. When init_responsibilities is given,
    that single hard/soft initialization is refined instead.
    """
    counts = _counts_matrix(tallies)
    pooled = dirichlet_mean(TallyVector(counts.sum(axis=0)), cfg.pseudocount)
    starts: list[tuple[Categorical, Categorical]] = []
    if init_responsibilities is not None:
        resp = np.asarray(init_responsibilities, dtype=np.float64)
        if resp.shape != (counts.shape[0], 2):
            raise ValueError(f"init_responsibilities must have shape ({counts.shape[0]}, 2)")
        starts.append(_em_m_step(counts, resp, cfg.pseudocount))
    else:
        rng = RngState(seed)
        for _ in range(cfg.em_restarts):
            q_a, rng = _perturbed(pooled, cfg.em_init_noise, rng)
            q_b, rng = _perturbed(pooled, cfg.em_init_noise, rng)
            starts.append((q_a, q_b))

    best: tuple | None = None
    for q_a0, q_b0 in starts:
        run = _em_run(counts, q_a0, q_b0, cfg)
        if best is None or run[3] > best[3]:
            best = run
    assert best is not None
    q_a, q_b, resp, objective, iterations, trace = best
    resp = np.array(resp)
    resp.setflags(write=False)
    return EmResult(
        q_a=q_a,
        q_b=q_b,
        responsibilities=resp,
        log_likelihood=objective,
        iterations=iterations,
        restarts_used=len(starts),
        trace=tuple(trace),
    )


def per_unit_mixture(result: EmResult, hard: bool = False) -> list[Categorical]:
    """Per-unit estimates from an EM result.

    Default is the responsibility-weighted mixture of the two type
    distributions; hard=True snaps each unit to its most likely type.
    """
    out = []
    for row in result.responsibilities:
        if hard:
            out.append(result.q_a if row[0] >= row[1] else result.q_b)
        else:
            out.append(
                Categorical(row[0] * result.q_a.weights + row[1] * result.q_b.weights)
            )
    return out


def independent_bits_estimate(
    bit_tallies: Sequence[tuple[float, float]], cfg: EstimatorConfig
) -> np.ndarray:
    """Per-variable Bernoulli posterior means under a Beta(pc, pc) prior."""
    probs = np.empty(len(bit_tallies))
    for i, (ones, total) in enumerate(bit_tallies):
        if ones < 0 or total < 0 or ones > total:
            raise ValueError(f"bad bit tally ({ones}, {total}) at variable {i}")
        probs[i] = (ones + cfg.pseudocount) / (total + 2.0 * cfg.pseudocount)
    return probs


def joint_dirichlet_estimate(joint_tally: TallyVector, cfg: EstimatorConfig) -> Categorical:
    """Smoothed estimate over the full outcome space (one bin per pattern)."""
    k = joint_tally.k
    if k & (k - 1) or k > (1 << 20):
        raise ValueError(f"joint tally size must be a power of two <= 2**20, got {k}")
    return dirichlet_mean(joint_tally, cfg.pseudocount)


def group_tallies(patterns: Sequence[int], grouping: Grouping) -> list[TallyVector]:
    """Per-group outcome tallies from projecting each pattern onto the grouping."""
    cell = 1 << grouping.s
    outcomes = group_outcomes(np.asarray(patterns, dtype=np.int64), grouping)
    return [TallyVector.from_outcomes(outcomes[:, j], cell) for j in range(grouping.g)]


def assignment_responsibilities(assignment: Sequence[str]) -> np.ndarray:
    """Hard (0/1) responsibility rows for a fixed a/b assignment."""
    return np.array([[1.0, 0.0] if lab == "a" else [0.0, 1.0] for lab in assignment])


def grouped_known_estimate(
    grouping: Grouping,
    patterns: Sequence[int],
    cfg: EstimatorConfig,
    share_types: bool = False,
    seed: int = 0,
    init_assignment: Sequence[str] | None = None,
) -> tuple[list[Categorical], EmResult | None]:
    """Per-group estimates for a known (or hypothesized) grouping.

    share_types=False treats the G groups as unrelated (smoothed tallies);
    share_types=True pools them through the two-type EM and returns each
    group's mixture estimate alongside the EM result.
    """
    tallies = group_tallies(patterns, grouping)
    if not share_types:
        return [dirichlet_mean(t, cfg.pseudocount) for t in tallies], None
    init = assignment_responsibilities(init_assignment) if init_assignment is not None else None
    result = em_two_type(tallies, cfg, seed, init_responsibilities=init)
    return per_unit_mixture(result), result
