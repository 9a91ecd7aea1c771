"""Isogeometric Kirchhoff-Love shells formulated in tangential differential calculus."""
from .assembly import (
    BoundaryCondition,
    MeanConstraint,
    NumericalFailure,
    ShellProblem,
    SingularSystemError,
    Solution,
    solve_problem,
)
from .bench import CASES, RunOptions, convergence_study, get_case, run_cell
from .nurbs import KnotVector, Mesh, NurbsPatch, SplineSpace, read_patch, write_patch
from .shell import Material

__version__ = "0.1.0"

__all__ = [
    "CASES",
    "BoundaryCondition",
    "KnotVector",
    "Material",
    "MeanConstraint",
    "Mesh",
    "NumericalFailure",
    "NurbsPatch",
    "RunOptions",
    "ShellProblem",
    "SingularSystemError",
    "Solution",
    "SplineSpace",
    "convergence_study",
    "get_case",
    "read_patch",
    "run_cell",
    "solve_problem",
    "write_patch",
]
