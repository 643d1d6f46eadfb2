"""Optimal control of linear delay differential equations.

The package simulates two delayed planning models (vintage capital and
goodwill with lags), reformulates them on the pair space R x L2([-R, 0]),
minimizes penalized discretized objectives by proximal gradient, and
verifies the dynamic-programming structure of the computed values.
"""

from .convex import (
    ConvexScalarFn,
    Crra,
    CustomConvex,
    HamiltonianSpec,
    IndicatorNonneg,
    LinearFn,
    LogUtility,
    Quadratic,
    UnboundedFeedbackError,
    absolute_value,
    conjugate,
    feedback,
    hamiltonian,
    moreau,
    parse_tag,
    prox,
    yosida_conjugate_check,
)
from .dde import (
    ControlGrid,
    EstimateReport,
    Grid,
    HistoryFunctional,
    InitialTriple,
    ModelSpec,
    Trajectory,
    apply_history_functional,
    estimate_check,
    extend_minus,
    extend_plus,
    segment_extract,
    simulate,
)
from .hjb import (
    GradientEstimate,
    ResidualReport,
    RolloutReport,
    closed_loop_rollout,
    gradient_fd,
    hjb_residual,
    spec_at_time,
)
from .structural import (
    M2Point,
    StructuralTrajectory,
    build_x1,
    eta_shift,
    evolve_abstract,
    lbar,
    m2_inner,
    semigroup_apply,
    structural_trajectory,
)
from .value import (
    BudgetExceededError,
    IllPosedError,
    ObjectiveSpec,
    PenalizedSolver,
    SolveResult,
    SolverError,
    as_m2,
    convexity_check,
    dp_oracle,
    dpp_check,
    evaluate_J,
    solve_penalized,
    value_W,
)

__version__ = "0.1.0"
