"""Hop-synchronous block diffusion and the convergence envelopes it is checked against."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from bitovernet.analytic import ModelParams, log_psi
from bitovernet.errors import ConnectivityError, DomainError, ParameterError
from bitovernet.graph import Graph


@dataclass(frozen=True, eq=False)
class PropagationTrace:
    """Arrival hop of a block at every miner; arrival time is ``hop * shd_ms``."""

    source: int
    shd_ms: float
    hops: np.ndarray

    @property
    def arrival_ms(self) -> np.ndarray:
        return self.hops * self.shd_ms

    @property
    def arrivals(self) -> list[tuple[int, float]]:
        return [(int(h), float(h * self.shd_ms)) for h in self.hops]

    @property
    def max_hop(self) -> int:
        return int(self.hops.max())

    def to_csv(self, fh) -> None:
        fh.write("node,hop,arrival_ms\n")
        for node, hop in enumerate(self.hops.tolist()):
            fh.write(f"{node},{hop},{hop * self.shd_ms!r}\n")


def simulate_propagation(g: Graph, source: int, shd_ms: float) -> PropagationTrace:
    """Every round, each miner that just got the block relays it to all neighbours."""
    if not 0 <= source < g.n:
        raise ParameterError(f"source {source} outside 0..{g.n - 1}")
    if not shd_ms > 0:
        raise ParameterError(f"single-hop delay must be positive, got {shd_ms}")
    indptr, indices = g.indptr, g.indices
    informed = np.zeros(g.n, dtype=bool)
    informed[source] = True
    hops = np.zeros(g.n, dtype=np.int64)
    fresh = [source]
    rnd = 0
    while fresh:
        rnd += 1
        relay = np.concatenate([indices[indptr[v]:indptr[v + 1]] for v in fresh])
        reached = np.unique(relay[~informed[relay]])
        informed[reached] = True
        hops[reached] = rnd
        fresh = reached.tolist()
    if not informed.all():
        lost = int(np.flatnonzero(~informed)[0])
        raise ConnectivityError(f"block never reaches node {lost}: graph is disconnected", node=lost)
    hops.flags.writeable = False
    return PropagationTrace(source, float(shd_ms), hops)


def _check_reach(n_reached, params: ModelParams) -> None:
    if not 1 <= n_reached <= params.n:
        raise ParameterError(f"n_reached must lie in [1, {params.n}], got {n_reached}")


def convergence_radius(n_reached: float, params: ModelParams, shd_ms: float) -> float:
    """Time for a block from a central miner to reach ``n_reached`` miners."""
    _check_reach(n_reached, params)
    return math.log(n_reached) / log_psi(params) * shd_ms


def convergence_diameter(n_reached: float, params: ModelParams, shd_ms: float) -> float:
    """Time for a block from a peripheral miner to reach ``n_reached`` miners."""
    _check_reach(n_reached, params)
    if n_reached <= 2 * params.m:
        raise DomainError(f"n_reached must exceed 2m={2 * params.m}, got {n_reached}")
    return (math.log(n_reached - 2 * params.m) / log_psi(params) + 2.0) * shd_ms


def cumulative_arrivals(trace: PropagationTrace) -> list[tuple[float, int]]:
    """Step series of ``(time_ms, nodes reached so far)``, one point per hop."""
    counts = np.bincount(trace.hops)
    reached = np.cumsum(counts)
    return [(float(h * trace.shd_ms), int(c)) for h, c in enumerate(reached.tolist()) if counts[h]]


def write_cumulative_csv(series, fh) -> None:
    fh.write("time_ms,nodes_reached\n")
    for t, c in series:
        fh.write(f"{t!r},{c}\n")
