"""Maximum-likelihood baselines for degree data: discrete power law and Poisson."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit, minimize_scalar
from scipy.special import gammainc, gammaln, zeta

from bitovernet.errors import ParameterError


@dataclass(frozen=True)
class PowerLawFit:
    """p(k) = (k + shift)^-alpha / zeta(alpha, k_min + shift) for k >= k_min."""

    alpha: float
    k_min: int
    shift: float
    loglik: float

    def pmf(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=np.float64)
        p = (k + self.shift) ** -self.alpha / zeta(self.alpha, self.k_min + self.shift)
        return np.where(k >= self.k_min, p, 0.0)


@dataclass(frozen=True)
class PoissonFit:
    """Poisson(rate) conditioned on k >= k_min."""

    rate: float
    k_min: int
    loglik: float

    def pmf(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=np.float64)
        logp = k * math.log(self.rate) - self.rate - gammaln(k + 1) - math.log(_tail_mass(self.rate, self.k_min))
        return np.where(k >= self.k_min, np.exp(logp), 0.0)


def _tail_mass(rate: float, k_min: int) -> float:
    # P(X >= k_min) for X ~ Poisson(rate) is the regularized lower gamma at k_min
    return 1.0 if k_min <= 0 else float(gammainc(k_min, rate))


def _tail(samples, k_min: int) -> np.ndarray:
    k = np.asarray(samples, dtype=np.int64)
    k = k[k >= k_min]
    if k.size == 0:
        raise ParameterError(f"no samples with k >= {k_min}")
    return k


def fit_power_law(samples, k_min: int = 0, shift: float | None = None) -> PowerLawFit:
    """MLE exponent; ``shift`` defaults to 1 when ``k_min`` is 0 so that k=0 has support."""
    if shift is None:
        shift = 1.0 if k_min <= 0 else 0.0
    k = _tail(samples, k_min)
    values, counts = np.unique(k, return_counts=True)
    log_sum = float(np.dot(counts, np.log(values + shift)))
    total = k.size
    base = k_min + shift

    def nll(alpha):
        return alpha * log_sum + total * math.log(zeta(alpha, base))

    res = minimize_scalar(nll, bounds=(1.0 + 1e-6, 50.0), method="bounded", options={"xatol": 1e-10})
    return PowerLawFit(float(res.x), k_min, shift, -float(res.fun))


def fit_poisson(samples, k_min: int = 0) -> PoissonFit:
    k = _tail(samples, k_min)
    values, counts = np.unique(k, return_counts=True)
    total, s = k.size, float(np.dot(counts, values))
    const = float(np.dot(counts, gammaln(values + 1)))

    def nll(rate):
        return -(s * math.log(rate) - total * rate - const - total * math.log(_tail_mass(rate, k_min)))

    if k_min <= 0:
        rate = s / total
    else:
        rate = float(minimize_scalar(nll, bounds=(1e-9, 10.0 * s / total + 10.0), method="bounded",
                                     options={"xatol": 1e-10}).x)
    return PoissonFit(rate, k_min, -nll(rate))


def loglik(samples, pmf: np.ndarray) -> float:
    """Log-likelihood of integer samples under a dense pmf indexed by k."""
    k = np.asarray(samples, dtype=np.int64)
    values, counts = np.unique(k, return_counts=True)
    p = np.array([pmf[v] if v < len(pmf) else 0.0 for v in values.tolist()])
    with np.errstate(divide="ignore"):
        return float(np.dot(counts, np.log(p)))


def fit_scale_free_diameter(n, d) -> tuple[float, float, float]:
    """Least-squares A, B, C of ``A * ln(n - B) + C``; a plotting baseline only."""
    n = np.asarray(n, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    if n.size < 3:
        raise ParameterError("need at least three points to fit A, B, C")

    def curve(x, a, b, c):
        return a * np.log(np.maximum(x - b, 1e-12)) + c

    params, _ = curve_fit(curve, n, d, p0=(1.0, 0.0, 0.0),
                          bounds=([-np.inf, -np.inf, -np.inf], [np.inf, float(n.min()) - 1e-9, np.inf]))
    return tuple(float(v) for v in params)


def total_variation(p, q) -> float:
    """Half the L1 distance between two pmfs indexed by k; the shorter one is zero-padded."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    size = max(p.size, q.size)
    p = np.pad(p, (0, size - p.size))
    q = np.pad(q, (0, size - q.size))
    return 0.5 * float(np.abs(p - q).sum())
