"""Periodic homogenization of principal eigenvalues for second-order
elliptic operators: torus cell problems, effective coefficients, corrector
hierarchies, and empirical convergence-rate studies.
"""

from .coeff import (
    BellmanSpec,
    CoefficientField,
    LinearOperatorSpec,
    PucciSpec,
    StructureReport,
    constant_field,
    eval_bellman,
    eval_pucci,
    make_field,
    pucci_controls_1d,
    separable_sin_field_2d,
    sin_field_1d,
    tabulated_field,
    validate_structure,
)
from .corrector import (
    DerivativeBundle,
    ExpansionResult,
    align_eigenfunctions,
    boundary_correctors,
    derivative_bundle,
    full_corrector,
    nonlinear_expansion,
    pivot_problem,
    second_corrector,
    solve_psi1,
    third_corrector,
)
from .domain import (
    DiscreteOperator,
    DomainGrid,
    apply_bellman,
    assemble_effective,
    assemble_linear,
    assemble_oscillatory,
    bellman_operators,
    dirichlet_solve,
    is_monotone,
    properness_shift,
)
from .effective import (
    CorrectorSet,
    EffectiveLinear,
    build_corrector_set,
    effective_linear,
    effective_nonlinear,
    linearize_effective,
)
from .eigen import (
    EigenPair,
    collatz_wielandt,
    principal_eigenpair,
    principal_eigenpair_bellman,
)
from .errors import (
    AssemblyError,
    ConfigError,
    ErgodicaError,
    InputError,
    IterationError,
    SolverError,
)
from .cli import SweepConfig, SweepReport, emit_report, fit_rate, run_sweep
from .torus import (
    ANCHOR,
    MEAN_ZERO,
    ErgodicSolution,
    GridFunction,
    PeriodicGrid,
    assemble_torus_diffusion,
    gradient_matrices,
    solve_cell,
    solve_cell_with_rhs,
    solve_nonlinear_cell,
)

__version__ = "0.1.0"
