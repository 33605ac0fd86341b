"""Block arrival logs: parsing, single-hop delay estimation, centrality, model comparison.

Canonical input is CSV with header ``block_hash,node_id,arrival_ms``. Rows may
come in any order; arrivals are grouped per block, sorted, and rebased so the
first observation of each block sits at offset 0.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, TextIO

import numpy as np
from scipy.optimize import minimize_scalar

from bitovernet.analytic import ModelParams
from bitovernet.errors import InsufficientDataError, ParameterError, ParseError
from bitovernet.propagation import convergence_diameter, convergence_radius

HEADER = ("block_hash", "node_id", "arrival_ms")
MAX_RECORDS = 1000
# arrival_ms values this large are read as milliseconds since the Unix epoch
EPOCH_MS_CUTOFF = 10**11
DEFAULT_CUTOFF = 0.10
SHD_GRID = (100.0, 10_000.0)


class UnorderedArrivalsWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class ArrivalLog:
    block_hash: str
    node_ids: np.ndarray
    offsets: np.ndarray
    epoch_based: bool = False

    def __post_init__(self):
        if self.offsets.size:
            if self.offsets[0] != 0:
                raise ParameterError("first arrival offset must be 0")
            if np.any(np.diff(self.offsets) < 0):
                raise ParameterError("arrival offsets must be non-decreasing")
        if self.offsets.size > MAX_RECORDS:
            raise ParameterError(f"at most {MAX_RECORDS} arrivals per block")

    def __len__(self) -> int:
        return int(self.offsets.size)

    @property
    def arrivals(self) -> list[tuple[int, int]]:
        return list(zip(self.node_ids.tolist(), self.offsets.tolist()))

    @classmethod
    def from_offsets(cls, block_hash: str, offsets: Iterable[float], node_ids=None) -> "ArrivalLog":
        off = np.asarray(list(offsets), dtype=np.float64)
        ids = np.arange(off.size) if node_ids is None else np.asarray(node_ids, dtype=np.int64)
        order = np.argsort(off, kind="stable")
        off = off[order]
        if off.size:
            off = off - off[0]
        return cls(block_hash, ids[order], off)


def _parse_canonical(stream: TextIO) -> list[tuple[str, int, float, int]]:
    reader = csv.reader(stream)
    rows = []
    header_seen = False
    for lineno, row in enumerate(reader, start=1):
        if not row or (len(row) == 1 and not row[0].strip()) or row[0].startswith("#"):
            continue
        if not header_seen:
            if tuple(c.strip() for c in row) != HEADER:
                raise ParseError(f"expected header {','.join(HEADER)}, got {','.join(row)}", line=lineno)
            header_seen = True
            continue
        if len(row) != 3:
            raise ParseError(f"expected 3 fields, got {len(row)}", line=lineno)
        block, node, when = (c.strip() for c in row)
        if not block:
            raise ParseError("empty block hash", line=lineno)
        try:
            rows.append((block, int(node), float(when), lineno))
        except ValueError:
            raise ParseError(f"non-numeric node_id or arrival_ms: {row!r}", line=lineno) from None
    return rows


ADAPTERS: dict[str, Callable[[TextIO], list[tuple[str, int, float, int]]]] = {
    "canonical": _parse_canonical,
}


def register_adapter(name: str, parser: Callable[[TextIO], list[tuple[str, int, float, int]]]) -> None:
    """Add a dataset reader yielding ``(block_hash, node_id, arrival_ms, line)`` rows."""
    ADAPTERS[name] = parser


def parse_arrival_log(stream: TextIO, fmt: str = "canonical") -> list[ArrivalLog]:
    """One :class:`ArrivalLog` per block hash, in order of first appearance."""
    try:
        adapter = ADAPTERS[fmt]
    except KeyError:
        raise ParameterError(f"unknown arrival log format {fmt!r}") from None
    grouped: dict[str, list[tuple[float, int]]] = {}
    for block, node, when, _ in adapter(stream):
        grouped.setdefault(block, []).append((when, node))
    logs = []
    for block, recs in grouped.items():
        times = np.array([t for t, _ in recs], dtype=np.float64)
        ids = np.array([n for _, n in recs], dtype=np.int64)
        if np.any(np.diff(times) < 0):
            warnings.warn(f"block {block}: arrivals out of order, sorted before rebasing",
                          UnorderedArrivalsWarning, stacklevel=2)
        order = np.argsort(times, kind="stable")
        times, ids = times[order], ids[order]
        epoch = bool(times[0] >= EPOCH_MS_CUTOFF)
        if times.size > MAX_RECORDS:
            warnings.warn(f"block {block}: keeping the first {MAX_RECORDS} of {times.size} arrivals",
                          stacklevel=2)
            times, ids = times[:MAX_RECORDS], ids[:MAX_RECORDS]
        logs.append(ArrivalLog(block, ids, times - times[0], epoch))
    return logs


def serialize_arrival_logs(logs: Iterable[ArrivalLog], stream: TextIO) -> None:
    """Canonical form: blocks in given order, arrivals sorted, offsets since first arrival."""
    stream.write(",".join(HEADER) + "\n")
    for log in logs:
        for node, off in zip(log.node_ids.tolist(), log.offsets.tolist()):
            text = str(int(off)) if float(off).is_integer() else repr(off)
            stream.write(f"{log.block_hash},{node},{text}\n")


# --- single-hop delay --------------------------------------------------------

@dataclass(frozen=True)
class ShdEstimate:
    shd_ms: float
    confidence: float


def _phase_residual(offsets: np.ndarray, spacing: float) -> float:
    """Mean squared distance of ``offsets/spacing`` to the nearest integer, after phase alignment.

    Measured in units of ``spacing`` so candidate spacings are comparable.
    """
    x = offsets / spacing
    phase = np.angle(np.mean(np.exp(2j * np.pi * x))) / (2 * np.pi)
    r = x - phase
    r -= np.round(r)
    return float(np.mean(r * r))


# mean squared residual of uniformly scattered phases
_UNIFORM_RESIDUAL = 1.0 / 12.0


def estimate_shd(log: ArrivalLog, grid: tuple[float, float] = SHD_GRID, min_arrivals: int = 10,
                 step: float = 2e-3, refine: int = 8, tie: float = 1e-8) -> ShdEstimate:
    """Spacing that best explains the arrival offsets as near-multiples of one delay.

    Candidates are scanned on a geometric grid and the ``refine`` best local
    minima polished with a bounded scalar search. Among spacings that fit
    equally well (2000 ms data also fits 1000 ms) the largest wins.
    """
    if len(log) < min_arrivals:
        raise InsufficientDataError(f"need at least {min_arrivals} arrivals, got {len(log)}")
    off = log.offsets.astype(np.float64)
    if off.max() <= 0:
        raise InsufficientDataError("all arrivals share one timestamp; spacing is undefined")
    lo, hi = grid
    cand = np.exp(np.arange(math.log(lo), math.log(hi) + step, step))
    scores = np.array([_phase_residual(off, s) for s in cand])
    padded = np.concatenate([[np.inf], scores, [np.inf]])
    minima = np.flatnonzero((scores <= padded[:-2]) & (scores <= padded[2:]))
    refined = []
    for i in minima[np.argsort(scores[minima], kind="stable")][:refine].tolist():
        a, b = cand[max(i - 1, 0)], cand[min(i + 1, cand.size - 1)]
        res = minimize_scalar(lambda s: _phase_residual(off, s), bounds=(a, b), method="bounded",
                              options={"xatol": 1e-7 * cand[i]})
        if res.fun <= scores[i]:
            refined.append((float(res.fun), float(res.x)))
        else:
            refined.append((float(scores[i]), float(cand[i])))
    best = min(score for score, _ in refined)
    score, shd = max((r for r in refined if r[0] <= best + tie), key=lambda r: r[1])
    confidence = max(0.0, 1.0 - score / _UNIFORM_RESIDUAL)
    return ShdEstimate(shd, confidence)


# --- centrality and model comparison ------------------------------------------

@dataclass(frozen=True)
class Centrality:
    label: str
    first_hop_fraction: float


def classify_centrality(log: ArrivalLog, shd_ms: float, cutoff: float = DEFAULT_CUTOFF) -> Centrality:
    """``high`` when at least ``cutoff`` of the logged arrivals land within one hop delay."""
    if not shd_ms > 0:
        raise ParameterError(f"shd_ms must be positive, got {shd_ms}")
    if len(log) == 0:
        return Centrality("low", 0.0)
    frac = float(np.count_nonzero(log.offsets <= shd_ms) / len(log))
    return Centrality("high" if frac >= cutoff else "low", frac)


@dataclass(frozen=True)
class ModelFit:
    """Observed arrival time of the ``n``-th miner against both convergence envelopes.

    Rows start at ``n = 2``; the first arrival is the offset origin.
    """

    n_reached: np.ndarray
    observed_ms: np.ndarray
    radius_ms: np.ndarray
    diameter_ms: np.ndarray
    fraction_below_diameter: float
    fraction_in_band: float
    degenerate: bool

    @property
    def radius_residual(self) -> np.ndarray:
        return self.observed_ms - self.radius_ms

    @property
    def diameter_residual(self) -> np.ndarray:
        return self.observed_ms - self.diameter_ms


def compare_to_model(log: ArrivalLog, params: ModelParams, shd_ms: float, tolerance_ms: float = 0.0) -> ModelFit:
    """Residuals of observed arrival times against the radius and diameter envelopes.

    The diameter envelope is defined only beyond ``2m`` miners; fractions are
    taken over those points. ``tolerance_ms`` widens the band on both sides.
    """
    counts = np.arange(2, min(len(log), params.n) + 1)
    observed = log.offsets[counts - 1].astype(np.float64)
    radius = np.array([convergence_radius(int(c), params, shd_ms) for c in counts])
    diam = np.array([convergence_diameter(int(c), params, shd_ms) if c > 2 * params.m else math.nan
                     for c in counts])
    tail = counts > 2 * params.m
    if tail.any():
        below = observed[tail] <= diam[tail] + tolerance_ms
        band = below & (observed[tail] >= radius[tail] - tolerance_ms)
        frac_below, frac_band = float(below.mean()), float(band.mean())
    else:
        frac_below = frac_band = math.nan
    degenerate = bool(len(log) == 0 or np.all(log.offsets == 0))
    return ModelFit(counts, observed, radius, diam, frac_below, frac_band, degenerate)
