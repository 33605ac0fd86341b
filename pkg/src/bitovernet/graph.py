"""Overlay topology generators and structural measurements.

Every generator grows the network one node at a time. Node ``j`` (0-indexed
join order) only ever links to nodes ``0..j-1`` and is recorded as the
*initiator* of those edges; the older endpoint receives an incoming link.
Distances ignore the direction, degree accounting does not.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple, TextIO

import numpy as np

from bitovernet.errors import ConnectivityError, ParameterError, ParseError

FIXED_M = "fixed-m"
BERNOULLI = "bernoulli"
VARIANTS = (FIXED_M, BERNOULLI)

# Above this size ``measure_diameter`` switches to the sampled lower bound.
EXACT_DIAMETER_LIMIT = 20_000


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable undirected graph whose edges remember who initiated them."""

    n: int
    initiator: np.ndarray
    target: np.ndarray
    m: int = 0
    variant: str = "none"
    seed: int | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError(f"graph needs at least one node, got n={self.n}")
        src = np.ascontiguousarray(self.initiator, dtype=np.int64)
        dst = np.ascontiguousarray(self.target, dtype=np.int64)
        if src.shape != dst.shape or src.ndim != 1:
            raise ParameterError("initiator and target must be 1-d arrays of equal length")
        if src.size:
            if src.min() < 0 or dst.min() < 0 or max(src.max(), dst.max()) >= self.n:
                raise ParameterError("edge endpoint outside 0..n-1")
            if np.any(src == dst):
                raise ParameterError("self-loops are not allowed")
            key = np.minimum(src, dst) * self.n + np.maximum(src, dst)
            if np.unique(key).size != key.size:
                raise ParameterError("duplicate edges are not allowed")
        src.flags.writeable = False
        dst.flags.writeable = False
        object.__setattr__(self, "initiator", src)
        object.__setattr__(self, "target", dst)

    @property
    def num_edges(self) -> int:
        return int(self.initiator.size)

    @property
    def edges(self) -> set[tuple[int, int]]:
        """Set of ``(initiator, target)`` pairs."""
        return set(zip(self.initiator.tolist(), self.target.tolist()))

    @cached_property
    def _csr(self) -> tuple[np.ndarray, np.ndarray]:
        u = np.concatenate([self.initiator, self.target])
        v = np.concatenate([self.target, self.initiator])
        order = np.lexsort((v, u))
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(u, minlength=self.n), out=indptr[1:])
        indices = v[order]
        indptr.flags.writeable = False
        indices.flags.writeable = False
        return indptr, indices

    @property
    def indptr(self) -> np.ndarray:
        return self._csr[0]

    @property
    def indices(self) -> np.ndarray:
        return self._csr[1]

    def neighbors(self, v: int) -> np.ndarray:
        indptr, indices = self._csr
        return indices[indptr[v]:indptr[v + 1]]

    def degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    def in_degree(self) -> np.ndarray:
        """Number of edges each node received from a later joiner."""
        return np.bincount(self.target, minlength=self.n)

    def out_degree(self) -> np.ndarray:
        return np.bincount(self.initiator, minlength=self.n)

    def same_edges(self, other: "Graph") -> bool:
        return (
            self.n == other.n
            and np.array_equal(self.initiator, other.initiator)
            and np.array_equal(self.target, other.target)
        )


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def _from_rows(n, rows, **meta) -> Graph:
    if rows:
        src = np.concatenate([np.full(len(t), j, dtype=np.int64) for j, t in rows])
        dst = np.concatenate([np.asarray(t, dtype=np.int64) for _, t in rows])
    else:
        src = dst = np.empty(0, dtype=np.int64)
    return Graph(n, src, dst, **meta)


def gen_random(n: int, p: float, seed=None) -> Graph:
    """Erdos-Renyi growth: each newcomer links to every older node with probability ``p``."""
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"link probability must lie in [0, 1], got {p}")
    rng = _rng(seed)
    rows = []
    for j in range(1, n):
        hit = np.flatnonzero(rng.random(j) < p)
        if hit.size:
            rows.append((j, hit))
    return _from_rows(n, rows, m=0, variant="random", seed=seed)


def gen_scale_free(n: int, m: int, seed=None) -> Graph:
    """Preferential attachment on top of an ``m+1`` seed clique.

    Each newcomer picks ``m`` distinct targets with probability proportional
    to their current degree, redrawing on duplicates.
    """
    if m < 1:
        raise ParameterError(f"m must be >= 1, got {m}")
    if n <= m:
        raise ParameterError(f"scale-free growth needs n > m, got n={n}, m={m}")
    rng = _rng(seed)
    n_edges = m * (m + 1) // 2 + (n - m - 1) * m
    # every edge endpoint appears once here, so uniform picks are degree-proportional
    ends = np.empty(2 * n_edges, dtype=np.int64)
    src = np.empty(n_edges, dtype=np.int64)
    dst = np.empty(n_edges, dtype=np.int64)
    e = 0
    for j in range(1, m + 1):
        for t in range(j):
            src[e], dst[e] = j, t
            ends[2 * e], ends[2 * e + 1] = j, t
            e += 1
    for j in range(m + 1, n):
        chosen: list[int] = []
        while len(chosen) < m:
            for t in ends[rng.integers(0, 2 * e, size=m - len(chosen))].tolist():
                if t not in chosen and len(chosen) < m:
                    chosen.append(t)
        for t in chosen:
            src[e], dst[e] = j, t
            ends[2 * e], ends[2 * e + 1] = j, t
            e += 1
    return Graph(n, src, dst, m=m, variant="scale-free", seed=seed)


def gen_evolutionary_random(n: int, m: int = 8, seed=None, variant: str = FIXED_M) -> Graph:
    """Evolutionary random growth.

    ``fixed-m``: node ``j`` links to ``min(j, m)`` distinct older nodes drawn
    uniformly (rejection sampling on collisions). ``bernoulli``: node ``j``
    links to each older node independently with probability ``min(1, m/j)``.
    """
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if m < 1:
        raise ParameterError(f"m must be >= 1, got {m}")
    if variant not in VARIANTS:
        raise ParameterError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    rng = _rng(seed)
    if variant == BERNOULLI:
        rows = []
        for j in range(1, n):
            hit = np.flatnonzero(rng.random(j) < min(1.0, m / j))
            if hit.size:
                rows.append((j, hit))
        return _from_rows(n, rows, m=m, variant=variant, seed=seed)

    head = [(j, np.arange(j)) for j in range(1, min(m, n - 1) + 1)]
    joiners = np.arange(m + 1, n, dtype=np.int64)
    picks = (rng.random((joiners.size, m)) * joiners[:, None]).astype(np.int64)
    if joiners.size and m > 1:
        s = np.sort(picks, axis=1)
        clashes = np.flatnonzero((s[:, 1:] == s[:, :-1]).any(axis=1))
        for r in clashes.tolist():
            j = int(joiners[r])
            chosen = list(dict.fromkeys(picks[r].tolist()))
            while len(chosen) < m:
                t = int(rng.integers(j))
                if t not in chosen:
                    chosen.append(t)
            picks[r] = chosen
    src = np.concatenate([np.full(j, j, dtype=np.int64) for j, _ in head] + [np.repeat(joiners, m)])
    dst = np.concatenate([t for _, t in head] + [picks.ravel()])
    return Graph(n, src, dst, m=m, variant=variant, seed=seed)


@dataclass(frozen=True)
class DegreeHistogram:
    counts: dict[int, int]
    n: int

    def __post_init__(self):
        if sum(self.counts.values()) != self.n:
            raise ParameterError("histogram counts must sum to n")

    @property
    def k_max(self) -> int:
        return max(self.counts) if self.counts else 0

    def fractions(self) -> np.ndarray:
        """Dense array indexed by k."""
        out = np.zeros(self.k_max + 1)
        for k, c in self.counts.items():
            out[k] = c / self.n
        return out

    def to_csv(self, fh: TextIO) -> None:
        fh.write("k,count,fraction\n")
        for k in sorted(self.counts):
            fh.write(f"{k},{self.counts[k]},{self.counts[k] / self.n!r}\n")

    @classmethod
    def pooled(cls, histograms: Iterable["DegreeHistogram"]) -> "DegreeHistogram":
        counts: dict[int, int] = {}
        total = 0
        for h in histograms:
            total += h.n
            for k, c in h.counts.items():
                counts[k] = counts.get(k, 0) + c
        return cls(dict(sorted(counts.items())), total)


def in_degree_histogram(g: Graph) -> DegreeHistogram:
    values, counts = np.unique(g.in_degree(), return_counts=True)
    return DegreeHistogram(dict(zip(values.tolist(), counts.tolist())), g.n)


# --- distances --------------------------------------------------------------

def bfs_distances(g: Graph, source: int) -> np.ndarray:
    """Hop distance from ``source`` to every node; -1 where unreachable."""
    if not 0 <= source < g.n:
        raise ParameterError(f"node {source} outside 0..{g.n - 1}")
    indptr, indices = g.indptr, g.indices
    dist = np.full(g.n, -1, dtype=np.int64)
    dist[source] = 0
    frontier = np.array([source], dtype=np.int64)
    level = 0
    while frontier.size:
        level += 1
        lo, hi = indptr[frontier], indptr[frontier + 1]
        lens = hi - lo
        total = int(lens.sum())
        if total == 0:
            break
        pos = np.repeat(hi - np.cumsum(lens), lens) + np.arange(total)
        nxt = indices[pos]
        nxt = np.unique(nxt[dist[nxt] < 0])
        dist[nxt] = level
        frontier = nxt
    return dist


def _require_connected(g: Graph, dist: np.ndarray | None = None) -> None:
    if dist is None:
        dist = bfs_distances(g, 0)
    missing = np.flatnonzero(dist < 0)
    if missing.size:
        raise ConnectivityError(
            f"graph is disconnected: node {int(missing[0])} is unreachable", node=int(missing[0])
        )


def eccentricity(g: Graph, v: int) -> int:
    dist = bfs_distances(g, v)
    _require_connected(g, dist)
    return int(dist.max())


def eccentricities(g: Graph) -> np.ndarray:
    """Eccentricity of every node, via bit-parallel BFS from 64 sources at a time."""
    _require_connected(g)
    n = g.n
    if n == 1:
        return np.zeros(1, dtype=np.int64)
    indptr, indices = g.indptr, g.indices
    starts = indptr[:-1]
    ecc = np.zeros(n, dtype=np.int64)
    one = np.uint64(1)
    for b0 in range(0, n, 64):
        k = min(64, n - b0)
        bits = one << np.arange(k, dtype=np.uint64)
        visited = np.zeros(n, dtype=np.uint64)
        visited[b0:b0 + k] = bits
        frontier = visited.copy()
        block = np.zeros(k, dtype=np.int64)
        level = 0
        while True:
            nxt = np.bitwise_or.reduceat(frontier[indices], starts) & ~visited
            grown = np.bitwise_or.reduce(nxt)
            if not grown:
                break
            level += 1
            visited |= nxt
            frontier = nxt
            block[(grown & bits) != 0] = level
        ecc[b0:b0 + k] = block
    return ecc


def diameter(g: Graph) -> int:
    """Exact diameter (maximum eccentricity)."""
    return int(eccentricities(g).max())


def radius(g: Graph) -> int:
    return int(eccentricities(g).min())


def sampled_diameter(g: Graph, sources: int = 64, seed=None) -> int:
    """Lower bound on the diameter from random sources plus a double sweep."""
    rng = _rng(seed)
    picks = rng.choice(g.n, size=min(sources, g.n), replace=False)
    best, far = -1, 0
    for s in picks.tolist():
        dist = bfs_distances(g, s)
        _require_connected(g, dist)
        if dist.max() > best:
            best, far = int(dist.max()), int(dist.argmax())
    sweep = bfs_distances(g, far)
    return max(best, int(sweep.max()))


class DiameterMeasurement(NamedTuple):
    value: int
    exact: bool


def measure_diameter(g: Graph, mode: str = "auto", sources: int = 64, seed=None) -> DiameterMeasurement:
    """``mode`` is ``exact``, ``sampled`` or ``auto`` (exact up to 20 000 nodes)."""
    if mode == "auto":
        mode = "exact" if g.n <= EXACT_DIAMETER_LIMIT else "sampled"
    if mode == "exact":
        return DiameterMeasurement(diameter(g), True)
    if mode == "sampled":
        return DiameterMeasurement(sampled_diameter(g, sources, seed), False)
    raise ParameterError(f"unknown diameter mode {mode!r}")


# --- serialization ----------------------------------------------------------

def write_edgelist(g: Graph, fh: TextIO) -> None:
    seed = "none" if g.seed is None else g.seed
    fh.write(f"{g.n} {g.m} {g.variant} {seed}\n")
    for u, v in zip(g.initiator.tolist(), g.target.tolist()):
        fh.write(f"{u} {v}\n")


def read_edgelist(fh: TextIO) -> Graph:
    header = fh.readline().split()
    if len(header) != 4:
        raise ParseError("header must be 'n m variant seed'", line=1)
    try:
        n, m = int(header[0]), int(header[1])
        seed = None if header[3] == "none" else int(header[3])
    except ValueError as exc:
        raise ParseError(f"bad header: {exc}", line=1) from None
    src, dst = [], []
    for lineno, line in enumerate(fh, start=2):
        if not line.strip():
            continue
        parts = line.split()
        try:
            u, v = int(parts[0]), int(parts[1])
        except (IndexError, ValueError):
            raise ParseError(f"expected 'initiator target', got {line.strip()!r}", line=lineno) from None
        src.append(u)
        dst.append(v)
    return Graph(n, np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64),
                 m=m, variant=header[2], seed=seed)
