"""Graded P1 finite elements for semilinear Neumann boundary control."""
from .benchmark import (
    BenchmarkProblem,
    ConvergenceReport,
    build_benchmark,
    compute_eoc,
    run_convergence_study,
)
from .control import (
    BoundaryControl,
    EdgeClassification,
    PostprocessedControl,
    clamp,
    classify_edges,
    l2_project_Qh,
    midpoint_interpolate_Rh,
    modified_interpolate_Rhu,
    postprocess,
)
from .errors import *  # noqa: F401,F403
from .fem import (
    FeFunction,
    assemble_boundary_mass,
    assemble_mass,
    assemble_stiffness,
    assemble_weighted_mass,
    integrate_boundary_load,
    integrate_volume_load,
    l2_error,
    solve_spd,
)
from .mesh import (
    CornerSpec,
    GradedMesh,
    PolygonalDomain,
    build_sector_domain,
    generate_graded_mesh,
    load_mesh,
    save_mesh,
    validate_grading,
)
from .optimizer import (
    OptimalTriple,
    SqpConfig,
    check_discrete_optimality,
    pdas_solve_subproblem,
    projected_gradient_reference,
    sqp_solve,
)
from .pde import (
    DiscreteProblem,
    NewtonConfig,
    ProblemSpec,
    apply_reduced_hessian,
    reduced_cost,
    reduced_gradient,
    solve_adjoint,
    solve_linearized_state,
    solve_state,
)
from .report import emit_report

__version__ = "0.1.0"
