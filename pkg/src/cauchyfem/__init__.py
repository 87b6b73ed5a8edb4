"""Stabilised finite elements for ill-posed elliptic Cauchy problems.

A small 2D library and experiment harness: criss-cross meshes of the unit
square, P1/P2 Lagrange elements, the symmetric primal-adjoint saddle-point
formulation with CIP / least-squares / H1 stabilisations, residual-based
monitors, and the desk-scale studies driven from the command line.
"""

from .analysis import ConvergenceTable, ErrorReport, eoc
from .assembly import (
    AssembledBlocks,
    DiscreteSolution,
    ExactSolution,
    ProblemSpec,
    SaddleSystem,
    StabilisationConfig,
    assemble_system,
)
from .harness import ExperimentConfig, run_case, run_convergence
from .mesh import Mesh, TaggedMesh, build_unit_square_mesh, extract_face_topology, tag_boundary
from .solver import solve
from .space import FeSpace

__all__ = [
    "AssembledBlocks",
    "ConvergenceTable",
    "DiscreteSolution",
    "ErrorReport",
    "ExactSolution",
    "ExperimentConfig",
    "FeSpace",
    "Mesh",
    "ProblemSpec",
    "SaddleSystem",
    "StabilisationConfig",
    "TaggedMesh",
    "assemble_system",
    "build_unit_square_mesh",
    "eoc",
    "extract_face_topology",
    "run_case",
    "run_convergence",
    "solve",
    "tag_boundary",
]

__version__ = "0.1.0"
