"""Parametric cost analysis of flexible ramping requirements in DC economic dispatch."""

__version__ = "0.1.0"

from .config import Tolerances
from .grid import GridModel, Generator, Line, bundled_model, load_model, min_cost, solve_dispatch
from .parametric import PiecewiseLinearFn, SliceSpec, construct_slice, feasible_bounds
from .surface import CostSurface, ContourSet, build_surface, contour
from .risk import (
    EmpiricalErrorDistribution, RegimeModel, greedy_dispatch, ingest_samples, risk_dispatch,
)

__all__ = [
    "Tolerances", "GridModel", "Generator", "Line", "bundled_model", "load_model",
    "min_cost", "solve_dispatch", "PiecewiseLinearFn", "SliceSpec", "construct_slice",
    "feasible_bounds", "CostSurface", "ContourSet", "build_surface", "contour",
    "EmpiricalErrorDistribution", "RegimeModel", "greedy_dispatch", "ingest_samples",
    "risk_dispatch",
]
