"""Stochastic-collocation study of the randomized Kelvin-Helmholtz problem.

Building blocks: ideal-gas state handling (gas), the embedded periodic grid
family (mesh), seventh-order central WENO interpolation and quadrature
(cweno), the fifth-order A-WENO / SSP-RK3 solver (solver), campaign
orchestration (ensemble), level-averaged statistics and defect diagnostics
(diagnostics), snapshot POD (pod), the analysis pipeline (pipeline), and
the CLI (cli).
"""

__version__ = "0.1.0"

from .gas import GasParams
from .mesh import GridField, MeshHierarchy, build_hierarchy
from .solver import RunResult, SolverConfig, advance
from .cweno import CwenoConfig, PiecewisePoly, cweno7_build
from .ensemble import CampaignSpec, CollocationGrid, KhConfig, PerturbationCoeffs

__all__ = [
    "__version__",
    "GasParams",
    "GridField",
    "MeshHierarchy",
    "build_hierarchy",
    "RunResult",
    "SolverConfig",
    "advance",
    "CwenoConfig",
    "PiecewisePoly",
    "cweno7_build",
    "CampaignSpec",
    "CollocationGrid",
    "KhConfig",
    "PerturbationCoeffs",
]
