"""Closed-form predictions of the evolutionary random graph model.

Node ``i`` (1-indexed join order) of an ``N``-node network collects incoming
links at a Poisson rate ``m * (H_N - H_max(m, i))``. The degree distribution,
the branching factor ``psi`` and every diameter estimate follow from that.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from bitovernet.errors import DegenerateModelError, DomainError, ParameterError

EULER_GAMMA = 0.5772156649015329
DIRECT_HARMONIC_LIMIT = 10**7
DEFAULT_K_MAX = 512
PSI_RTOL = 1e-12


class TruncationWarning(RuntimeWarning):
    """An infinite series was cut at ``k_max`` before converging."""


@dataclass(frozen=True)
class ModelParams:
    n: int
    m: int = 8
    k_max: int = DEFAULT_K_MAX
    normalize: bool = True

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError(f"n must be >= 1, got {self.n}")
        if self.m < 1:
            raise ParameterError(f"m must be >= 1, got {self.m}")
        if self.k_max < 1:
            raise ParameterError(f"k_max must be >= 1, got {self.k_max}")

    def require_diameter_domain(self) -> None:
        if self.n <= 2 * self.m:
            raise DomainError(f"need n > 2m, got n={self.n}, m={self.m}")


def harmonic(n: int, method: str = "auto") -> float:
    """n-th harmonic number; asymptotic expansion above 10**7 terms."""
    if n < 1:
        raise ParameterError(f"harmonic number needs n >= 1, got {n}")
    if method == "auto":
        method = "direct" if n <= DIRECT_HARMONIC_LIMIT else "asymptotic"
    if method == "direct":
        # reversed so the small terms are accumulated first
        return float(np.sum(1.0 / np.arange(n, 0, -1, dtype=np.float64)))
    if method == "asymptotic":
        return math.log(n) + EULER_GAMMA + 1.0 / (2 * n)
    raise ParameterError(f"unknown method {method!r}")


@lru_cache(maxsize=64)
def _join_rates(n: int, m: int) -> np.ndarray:
    """m * (H_N - H_max(m,i)) for i = 1..N, clipped at zero when m > N."""
    if max(n, m) <= DIRECT_HARMONIC_LIMIT:
        h = np.cumsum(1.0 / np.arange(1, max(n, m) + 1))
        h_n = h[n - 1]
        h_i = h[np.maximum(np.arange(1, n + 1), m) - 1]
    else:
        h_n = harmonic(n)
        idx = np.maximum(np.arange(1, n + 1), m).astype(np.float64)
        h_i = np.log(idx) + EULER_GAMMA + 0.5 / idx
    rates = m * np.clip(h_n - h_i, 0.0, None)
    rates.flags.writeable = False
    return rates


def _poisson_log_terms(k: int, rates: np.ndarray, log_rates: np.ndarray) -> np.ndarray:
    if k == 0:
        return -rates
    return k * log_rates - rates - gammaln(k + 1)


@dataclass(frozen=True)
class DegreePmf:
    probabilities: np.ndarray
    params: ModelParams

    def __getitem__(self, k: int) -> float:
        return float(self.probabilities[k]) if k < self.probabilities.size else 0.0

    def to_csv(self, fh) -> None:
        fh.write("k,probability\n")
        for k, p in enumerate(self.probabilities.tolist()):
            fh.write(f"{k},{p!r}\n")


def degree_pmf(params: ModelParams) -> DegreePmf:
    """Expected fraction of nodes with ``k`` incoming links.

    With ``normalize`` off the per-node Poisson masses are summed without the
    ``1/N`` factor, so the entries total ``N``.
    """
    rates = _join_rates(params.n, params.m)
    with np.errstate(divide="ignore"):
        log_rates = np.log(rates)
    peak = float(rates.max())
    out = []
    for k in range(params.k_max + 1):
        p = float(np.exp(_poisson_log_terms(k, rates, log_rates)).sum())
        out.append(p)
        if k > peak and p < 1e-18 * params.n:
            break
    probs = np.array(out)
    if params.normalize:
        probs /= params.n
    while probs.size > 1 and probs[-1] < 1e-300:
        probs = probs[:-1]
    return DegreePmf(probs, params)


@dataclass(frozen=True)
class PsiEstimate:
    """Value of the branching factor plus how the series was cut."""

    value: float
    terms: int
    converged: bool

    def __float__(self) -> float:
        return self.value


@lru_cache(maxsize=256)
def _psi_series(n: int, m: int, k_max: int) -> PsiEstimate:
    rates = _join_rates(n, m)
    with np.errstate(divide="ignore"):
        log_rates = np.log(rates)
    peak = float(rates.max())
    total = 0.0
    for k in range(1, k_max + 1):
        term = (k + m) * float(np.exp(_poisson_log_terms(k, rates, log_rates)).sum()) / n
        total += term
        if k > peak and term <= PSI_RTOL * total:
            return PsiEstimate(total, k, True)
    return PsiEstimate(total, k_max, False)


def psi(params: ModelParams) -> PsiEstimate:
    """Aggregate branching factor used as the logarithm base of the diameter.

    Each ``k`` term is ``(k+m) m^k / k!`` times the mean over join positions of
    ``h^k e^{-m h}``. Emits :class:`TruncationWarning` when ``k_max`` is reached
    first.
    """
    est = _psi_series(params.n, params.m, params.k_max)
    if not est.converged:
        warnings.warn(
            f"psi series not converged after k_max={params.k_max} terms (n={params.n}, m={params.m})",
            TruncationWarning,
            stacklevel=2,
        )
    return est


def log_psi(params: ModelParams) -> float:
    value = float(_psi_series(params.n, params.m, params.k_max).value)
    if value <= 1.0:
        raise DegenerateModelError(f"psi={value:.6g} <= 1, logarithm base is degenerate")
    return math.log(value)


def diameter_analytic(params: ModelParams) -> float:
    params.require_diameter_domain()
    return math.log(params.n - 2 * params.m) / log_psi(params) + 2.0


def diameter_simplified(n: float) -> float:
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    return 1.0 + math.log10(n)


def diameter_simplified_m(n: float, m: int) -> float:
    """``1 + log_{m+2}(n)``; identical to :func:`diameter_simplified` at m=8."""
    if n < 1 or m < 1:
        raise ParameterError(f"need n >= 1 and m >= 1, got n={n}, m={m}")
    return 1.0 + math.log10(n) / math.log10(m + 2)


def diameter_random(n: float, mean_degree: float) -> float:
    if mean_degree <= 1:
        raise DegenerateModelError(f"mean degree must exceed 1, got {mean_degree}")
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    return math.log(n) / math.log(mean_degree)


def write_sweep_csv(rows, fh) -> None:
    """``rows`` of ``(n, m, value)``."""
    fh.write("n,m,value\n")
    for n, m, value in rows:
        fh.write(f"{n},{m},{float(value)!r}\n")
