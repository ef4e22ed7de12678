"""Finite-element interior-point solver for convex Euler-Lagrange problems.

Minimizes int_Omega f u + Lambda(grad u) over u with Dirichlet boundary data
by epigraph lifting, a self-concordant barrier for the integrand, and
central-path following. Three strategies are provided: a naive single-path
algorithm (h-then-t and theta refinement schedules), a multigrid barrier
algorithm that re-centers shifted central paths on a grid hierarchy, and its
practical variant with capped direct steps and adaptive step sizes.
"""

from .barrier import PLapBarrier
from .pathfollow import PathConfig, PathTrace, run_mgb, run_naive
from .problems import ProblemSpec, build_problem

__all__ = [
    "PLapBarrier",
    "PathConfig",
    "PathTrace",
    "ProblemSpec",
    "build_problem",
    "run_mgb",
    "run_naive",
]

__version__ = "0.1.0"
