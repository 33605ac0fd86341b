"""Evolutionary random graph model of the Bitcoin miner overlay network."""

__version__ = "0.1.0"

from bitovernet.errors import (
    BitOverNetError,
    ConnectivityError,
    DegenerateModelError,
    DomainError,
    InsufficientDataError,
    NoEquilibriumError,
    ParameterError,
    ParseError,
)
from bitovernet.graph import (
    DegreeHistogram,
    Graph,
    diameter,
    eccentricities,
    eccentricity,
    gen_evolutionary_random,
    gen_random,
    gen_scale_free,
    in_degree_histogram,
    measure_diameter,
    radius,
)
from bitovernet.analytic import (
    ModelParams,
    degree_pmf,
    diameter_analytic,
    diameter_random,
    diameter_simplified,
    diameter_simplified_m,
    harmonic,
    psi,
)

__all__ = [
    "BitOverNetError",
    "ConnectivityError",
    "DegenerateModelError",
    "DegreeHistogram",
    "DomainError",
    "Graph",
    "InsufficientDataError",
    "ModelParams",
    "NoEquilibriumError",
    "ParameterError",
    "ParseError",
    "degree_pmf",
    "diameter",
    "diameter_analytic",
    "diameter_random",
    "diameter_simplified",
    "diameter_simplified_m",
    "eccentricities",
    "eccentricity",
    "gen_evolutionary_random",
    "gen_random",
    "gen_scale_free",
    "harmonic",
    "in_degree_histogram",
    "measure_diameter",
    "psi",
    "radius",
]
