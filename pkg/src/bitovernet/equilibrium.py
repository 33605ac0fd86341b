"""Mining economics and the equilibrium network size.

The equilibrium condition is solved by bisection on the increasing branch of
``lhs_eq13`` to the right of its singularity at ``log10 n = 1``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar

from bitovernet.analytic import ModelParams, diameter_analytic, log_psi
from bitovernet.errors import DomainError, NoEquilibriumError, ParameterError
from bitovernet.forking import exposure

SINGULAR_MARGIN = 1e-3
BRACKET_HIGH = 1e12
RESIDUAL_RTOL = 1e-9
GRID_POINTS = 4000


@dataclass(frozen=True)
class EconParams:
    profit_mining: float
    c: float = 1.0
    threshold: float = 0.05
    m: int = 8
    shd_ms: float = 2000.0
    computational_speed: float = 1.0

    def __post_init__(self):
        if self.profit_mining < 0:
            raise ParameterError(f"profit_mining must be >= 0, got {self.profit_mining}")
        if not self.c > 0:
            raise ParameterError(f"cost constant c must be positive, got {self.c}")
        if not 0 < self.threshold < 1:
            raise ParameterError(f"threshold must lie in (0, 1), got {self.threshold}")

    @property
    def target(self) -> float:
        """Right-hand side of the equilibrium condition, -ln(1-threshold)*profit/c."""
        return -math.log1p(-self.threshold) * self.profit_mining / self.c


def cost_mining(ec: EconParams, mining_difficulty: float) -> float:
    if not ec.computational_speed > 0:
        raise ParameterError(f"computational speed must be positive, got {ec.computational_speed}")
    return ec.c * mining_difficulty / ec.computational_speed


@dataclass(frozen=True)
class FeasibilityBound:
    rhs: float
    n: int
    feasible: bool


def max_miners_bound(ec: EconParams, params: ModelParams) -> FeasibilityBound:
    """Largest network size for which mining stays profitable at the fork-safe difficulty."""
    p = math.exp(log_psi(params))
    hops = math.floor(diameter_analytic(params))
    rhs = (ec.profit_mining / ec.c) * -math.log1p(-ec.threshold) / (ec.shd_ms * exposure(hops, p))
    return FeasibilityBound(rhs, params.n, params.n <= rhs)


def _lower_edge(m: int) -> float:
    return max(2 * m, 10) + SINGULAR_MARGIN


def log_lhs_eq13(n: float, m: int) -> float:
    if not n > _lower_edge(m):
        raise DomainError(f"lhs_eq13 needs n > max(2m, 10) + {SINGULAR_MARGIN}, got n={n}, m={m}")
    lg = math.log10(n)
    return math.log(n) + math.log1p(lg) + math.log(n - 2 * m) / (lg - 1.0)


def lhs_eq13(n: float, m: int) -> float:
    """n (1 + log10 n) exp(ln(n - 2m) / (log10 n - 1)); ``inf`` if it overflows."""
    v = log_lhs_eq13(n, m)
    return math.exp(v) if v < 709.0 else math.inf


@dataclass(frozen=True)
class Branch:
    lower: float
    n_min: float
    lhs_min: float
    upper: float
    local_minima: int
    monotone: bool


@lru_cache(maxsize=64)
def monotone_branch(m: int) -> Branch:
    """Locate the increasing branch of ``lhs_eq13`` by a log-spaced grid scan."""
    lo = _lower_edge(m) * (1 + 1e-12)
    grid = np.geomspace(lo, BRACKET_HIGH, GRID_POINTS)
    vals = np.array([log_lhs_eq13(x, m) for x in grid])
    interior = np.flatnonzero((vals[1:-1] < vals[:-2]) & (vals[1:-1] <= vals[2:])) + 1
    if interior.size:
        i = int(interior[-1])
        res = minimize_scalar(lambda x: log_lhs_eq13(x, m), bounds=(grid[i - 1], grid[i + 1]),
                              method="bounded", options={"xatol": 1e-10 * grid[i]})
        n_min = float(res.x)
        right = vals[i + 1:]
    else:
        n_min = lo
        right = vals
    monotone = bool(np.all(np.diff(right) > 0))
    return Branch(lo, n_min, lhs_eq13(n_min, m), BRACKET_HIGH, int(interior.size), monotone)


@dataclass
class EquilibriumResult:
    n_star: float
    n_floor: int
    target: float
    residual: float
    iterations: int
    branch: Branch
    inputs: dict = field(default_factory=dict)

    def report(self) -> dict:
        out = asdict(self)
        out["branch"]["chosen"] = "rightmost increasing branch"
        return out

    def to_json(self) -> str:
        return json.dumps(self.report(), indent=2, sort_keys=True)


def equilibrium_size(ec: EconParams, m: int | None = None, max_iter: int = 400) -> EquilibriumResult:
    """Network size at which mining profit reaches zero.

    Raises :class:`NoEquilibriumError` when the target lies below the minimum
    of the increasing branch (profit below the viability floor) or above the
    bracket.
    """
    m = ec.m if m is None else m
    if m < 1:
        raise ParameterError(f"m must be >= 1, got {m}")
    target = ec.target
    branch = monotone_branch(m)
    if not target > branch.lhs_min:
        raise NoEquilibriumError(
            f"no equilibrium: profit below viability floor (target {target:.6g} <= branch minimum {branch.lhs_min:.6g})"
        )
    lo, hi = branch.n_min, branch.upper
    if lhs_eq13(hi, m) < target:
        raise NoEquilibriumError(f"no equilibrium below n={hi:.3g}: target {target:.6g} too large")
    it = 0
    mid = 0.5 * (lo + hi)
    f_mid = lhs_eq13(mid, m) - target
    while it < max_iter:
        it += 1
        mid = 0.5 * (lo + hi)
        f_mid = lhs_eq13(mid, m) - target
        if abs(f_mid) <= RESIDUAL_RTOL * target or mid in (lo, hi):
            break
        if f_mid > 0:
            hi = mid
        else:
            lo = mid
    inputs = {
        "profit_mining": ec.profit_mining,
        "c": ec.c,
        "threshold": ec.threshold,
        "m": m,
    }
    return EquilibriumResult(mid, math.floor(mid), target, abs(f_mid), it, branch, inputs)
