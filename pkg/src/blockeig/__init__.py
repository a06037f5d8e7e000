"""Block eigensolvers for large Hermitian operators.

The PPCG solver computes many algebraically smallest eigenpairs with
infrequent Rayleigh-Ritz passes; Davidson-Liu and LOBPCG reference solvers
share the same kernels and report schema for head-to-head comparisons.
"""

from .baselines import BaselineOptions, davidson_solve, lobpcg_solve
from .core import (
    PencilSolution,
    SmallPencil,
    block_inner,
    cholesky_qr,
    project_out,
    solve_pencil,
    taylor_polar_orth,
)
from .errors import (
    ApplicabilityError,
    BlockeigError,
    DimensionError,
    ParseError,
    RankDeficiencyError,
    SingularGramError,
    UnsupportedFormatError,
)
from .operators import (
    DenseHermitian,
    DiagonalOperator,
    DiagonalPreconditioner,
    IdentityPreconditioner,
    MatrixFreeOperator,
)
from .ppcg import (
    SolveReport,
    SolverOptions,
    SolverState,
    block_update,
    fallback_steepest_descent,
    lock_and_compact,
    ppcg_solve,
    split_blocks,
)
from .problems import (
    SparseHermitian,
    jacobi_preconditioner,
    laplacian_1d,
    laplacian_3d,
    laplacian_plus_potential,
    random_hermitian,
    read_matrix_market,
    well_problem,
    write_matrix_market,
)
from .rayleigh_ritz import (
    ConvergenceMetrics,
    RitzResult,
    convergence_metrics,
    detect_converged,
    rayleigh_ritz,
    subspace_residual,
)

__version__ = "0.1.0"
