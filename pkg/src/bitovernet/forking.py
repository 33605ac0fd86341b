"""Fork probability bounds, minimum safe difficulty and a Monte Carlo fork simulator.

The analytic bound treats every hop ``i`` of the propagation as a window of
length ``shd`` during which ``psi**i`` miners keep mining at rate
``lambda_mine``; a fork is any competing block inside the convergence time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from bitovernet.analytic import ModelParams, diameter_analytic, log_psi
from bitovernet.errors import ParameterError
from bitovernet.graph import Graph, _require_connected, bfs_distances


@dataclass(frozen=True)
class ForkParams:
    params: ModelParams
    shd_ms: float = 2000.0
    lambda_mine: float = 0.0
    threshold: float = 0.05

    def __post_init__(self):
        if self.lambda_mine < 0:
            raise ParameterError(f"lambda_mine must be >= 0, got {self.lambda_mine}")
        if not 0 < self.threshold < 1:
            raise ParameterError(f"threshold must lie in (0, 1), got {self.threshold}")
        if not self.shd_ms > 0:
            raise ParameterError(f"shd_ms must be positive, got {self.shd_ms}")


@dataclass(frozen=True)
class MonteCarloEstimate:
    probability: float
    trials: int
    standard_error: float


@dataclass(frozen=True)
class ForkEstimate:
    lower: float
    upper: float
    mc_estimate: MonteCarloEstimate | None = None
    hops_lower: int = 0
    hops_upper: int = 0


def lambda_mine(computational_speed: float, mining_difficulty: float) -> float:
    """Per-miner block rate: speed over difficulty."""
    if mining_difficulty <= 0:
        raise ParameterError(f"mining difficulty must be positive, got {mining_difficulty}")
    return computational_speed / mining_difficulty


def _hop_counts(params: ModelParams) -> tuple[int, int]:
    d = diameter_analytic(params)
    return math.floor(d), math.ceil(d)


def exposure(hops: int, psi_value: float) -> float:
    """sum_{i=1}^{hops} psi**i."""
    return float(sum(psi_value**i for i in range(1, hops + 1)))


def fork_probability(hops: int, shd_ms: float, rate: float, psi_value: float) -> float:
    """1 - prod_{i=1}^{hops} exp(-shd * rate * psi**i)."""
    return -math.expm1(-shd_ms * rate * exposure(hops, psi_value))


def fork_probability_bounds(fp: ForkParams) -> ForkEstimate:
    """Evaluate the product over ``floor(d)`` and ``ceil(d)`` hops, ordered as (min, max)."""
    p = math.exp(log_psi(fp.params))
    d_lo, d_hi = _hop_counts(fp.params)
    a = fork_probability(d_lo, fp.shd_ms, fp.lambda_mine, p)
    b = fork_probability(d_hi, fp.shd_ms, fp.lambda_mine, p)
    return ForkEstimate(min(a, b), max(a, b), hops_lower=d_lo, hops_upper=d_hi)


def min_difficulty(computational_speed: float, fp: ForkParams, hops: str = "ceil") -> float:
    """Smallest difficulty keeping the fork probability at or below ``fp.threshold``.

    ``hops="ceil"`` sums the exposure over ``ceil(d)`` hops so the upper bound
    of :func:`fork_probability_bounds` is respected; ``"floor"`` gives the
    shorter sum.
    """
    if not 0 < fp.threshold < 1:
        raise ParameterError(f"threshold must lie in (0, 1), got {fp.threshold}")
    if hops not in ("ceil", "floor"):
        raise ParameterError(f"hops must be 'ceil' or 'floor', got {hops!r}")
    p = math.exp(log_psi(fp.params))
    d_lo, d_hi = _hop_counts(fp.params)
    total = fp.shd_ms * exposure(d_hi if hops == "ceil" else d_lo, p)
    return computational_speed * total / -math.log1p(-fp.threshold)


def simulate_forking(g: Graph, shd_ms: float, lambda_mine: float, trials: int, seed=0) -> MonteCarloEstimate:
    """Fraction of trials in which a second block is mined before the first covers the network.

    Trial ``t`` draws from its own generator seeded by ``(seed, t)``. The first
    block appears at a uniform random miner at time 0; every other miner mines
    with an exponential clock of rate ``lambda_mine`` until the block reaches
    it ``hop * shd_ms`` later.
    """
    if trials < 1:
        raise ParameterError(f"trials must be >= 1, got {trials}")
    if lambda_mine < 0 or not shd_ms > 0:
        raise ParameterError("need lambda_mine >= 0 and shd_ms > 0")
    _require_connected(g)
    if lambda_mine == 0 or g.n == 1:
        return MonteCarloEstimate(0.0, trials, 0.0)
    deadlines: dict[int, np.ndarray] = {}
    forks = 0
    scale = 1.0 / lambda_mine
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        source = int(rng.integers(g.n))
        if source not in deadlines:
            deadlines[source] = bfs_distances(g, source) * shd_ms
        clocks = rng.exponential(scale, size=g.n)
        # the source itself has deadline 0 and can never register
        if np.any(clocks < deadlines[source]):
            forks += 1
    p = forks / trials
    return MonteCarloEstimate(p, trials, math.sqrt(p * (1 - p) / trials))


def write_results_csv(rows, fh) -> None:
    """``rows`` of ``(lambda_mine, shd_ms, ForkEstimate)``."""
    fh.write("lambda_mine,shd_ms,lower,upper,mc_estimate,mc_se,trials\n")
    for lam, shd, est in rows:
        mc = est.mc_estimate
        tail = f"{mc.probability!r},{mc.standard_error!r},{mc.trials}" if mc else ",,"
        fh.write(f"{lam!r},{shd!r},{est.lower!r},{est.upper!r},{tail}\n")
