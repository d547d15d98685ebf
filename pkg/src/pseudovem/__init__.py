"""Lowest-order mixed virtual element solver for the generalized Oseen
problem in pseudostress-velocity form on polygonal meshes."""

from .assembly import (
    AssemblyError,
    LocalForms,
    SaddleSystem,
    STAB_VARIANTS,
    assemble_global,
    build_all_local_forms,
    local_forms,
)
from .cli import ConfigError, RunConfig, export_fields, main, parse_config, run_experiment
from .mesh import (
    ElementGeometry,
    MeshError,
    MeshFormatError,
    PolyMesh,
    all_geometries,
    build_polymesh,
    element_geometry,
    load_mesh,
    mesh_size,
    save_mesh,
    validate_mesh,
)
from .meshgen import MeshFamily, generate_mesh
from .polybasis import MeshQuadrature, ScaledMonomialBasis, l2_project, polygon_rule
from .postprocess import (
    ConvergenceRecord,
    DiscreteSolution,
    ErrorReport,
    ZeroDenominatorError,
    compute_errors,
    convergence_rates,
    recover_pressure,
)
from .problems import (
    CASE_TAGS,
    CaseResidualError,
    OseenCase,
    OseenParameters,
    build_case,
    residual_check,
    smallness_indicator,
)
from .solver import (
    IllConditionedSolveError,
    SingularSystemError,
    SolveReport,
    SolverError,
    solve,
)
from .vemspace import (
    PiecewiseVectorField,
    VirtualTensorField,
    interpolate_tensor,
    n_sigma_dofs,
    pi_projection,
    pi_projection_all,
)

__version__ = "0.1.0"

__all__ = [
    "AssemblyError",
    "CASE_TAGS",
    "CaseResidualError",
    "ConfigError",
    "ConvergenceRecord",
    "DiscreteSolution",
    "ElementGeometry",
    "ErrorReport",
    "IllConditionedSolveError",
    "LocalForms",
    "MeshError",
    "MeshFamily",
    "MeshFormatError",
    "MeshQuadrature",
    "OseenCase",
    "OseenParameters",
    "PiecewiseVectorField",
    "PolyMesh",
    "RunConfig",
    "STAB_VARIANTS",
    "SaddleSystem",
    "ScaledMonomialBasis",
    "SingularSystemError",
    "SolveReport",
    "SolverError",
    "VirtualTensorField",
    "ZeroDenominatorError",
    "all_geometries",
    "assemble_global",
    "build_all_local_forms",
    "build_case",
    "build_polymesh",
    "compute_errors",
    "convergence_rates",
    "element_geometry",
    "export_fields",
    "generate_mesh",
    "interpolate_tensor",
    "l2_project",
    "load_mesh",
    "local_forms",
    "main",
    "mesh_size",
    "n_sigma_dofs",
    "parse_config",
    "pi_projection",
    "pi_projection_all",
    "polygon_rule",
    "recover_pressure",
    "residual_check",
    "run_experiment",
    "save_mesh",
    "smallness_indicator",
    "solve",
    "validate_mesh",
]
