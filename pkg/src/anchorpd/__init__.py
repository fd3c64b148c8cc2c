"""Anchored acceleration for preconditioned primal-dual splitting.

Layers: ``linops`` (operators, spectral norms), ``precond`` (the block
preconditioner and its semi-inner product), ``fixpoint`` (iteration engines),
``problems`` (matrix-game and LASSO generators, prox maps, metrics),
``cpsolver`` (the primal-dual resolvent and solver assemblies), ``bench``
(experiment CLI and trace files).
"""

from .linops import (
    DenseOperator,
    DimensionMismatchError,
    LinearOperator,
    NormEstimate,
    SparseOperator,
    dot,
    estimate_operator_norm,
    operator_norm,
)
from .precond import (
    AdmissibilityError,
    CpPreconditioner,
    PrimalDualPoint,
    assemble_matrix,
    lipschitz_bound,
    m_distance,
    m_inner,
    m_seminorm,
    make_point,
    make_preconditioner,
)
from .fixpoint import (
    Algorithm,
    AnchorState,
    IterationTrace,
    NumericDivergenceError,
    SolverConfig,
    TraceRow,
    halpern_fixed_step,
    pha_step,
    phi_update,
    picard_step,
    run,
)
from .problems import (
    FeasibilityError,
    LassoInstance,
    MatrixGameInstance,
    game_gap,
    game_residual,
    gen_lasso,
    gen_matrix_game,
    lasso_objective,
    load_instance,
    project_simplex,
    prox_gstar_lasso,
    save_instance,
    soft_threshold,
)
from .cpsolver import (
    ConfiguredSolver,
    CpFixedPointMap,
    CpProblem,
    LassoGapSpec,
    build_acp,
    build_solver,
    cp_resolvent,
    game_cp_problem,
    lasso_cp_problem,
    pd_gap,
    preconditioner,
    residual_map,
    residual_norm,
    rho_constant,
)

__version__ = "0.1.0"
