"""Gauss quadrature, Lanczos-Stieltjes polynomials and inverse-regression dimension reduction."""

from .harness import (
    ConfigError,
    ConvergenceReport,
    ExperimentConfig,
    ReferenceRunError,
    fit_slope,
    run_matrix_convergence,
    run_mc_mode_comparison,
    run_quadrature_convergence,
    run_slice_comparison,
)
from .jacobi import EigenConvergenceError, JacobiMatrix, tridiagonal_eigh
from .lanczos import (
    LanczosFactorization,
    composite_factorization,
    lanczos_diagonal,
    output_quadrature,
    polynomials_at_responses,
)
from .models import (
    DomainError,
    Model,
    ModelEvaluationError,
    StandardizationMap,
    build_model,
    model_ex1,
    model_ex2,
    model_ex3_otl,
    standardize_uniform,
)
from .orthopoly import (
    BreakdownError,
    PolynomialTable,
    eval_polynomials,
    evaluate_expansion,
    pseudospectral_coefficients,
    stieltjes_discrete,
)
from .quadrature import (
    MeasureSpec,
    NodeBudgetError,
    QuadratureRule,
    clenshaw_curtis_rule,
    clenshaw_curtis_tensor_rule,
    gauss_rule,
    gauss_tensor_rule,
    monte_carlo_rule,
    nested_indices,
    tensor_rule,
)
from .sdr import (
    PSDViolation,
    SdrMatrix,
    SlicePartition,
    frobenius_distance,
    lsave,
    lsir,
    relative_error,
    save,
    sir,
    slice_equal_count,
    subspace,
)

__version__ = "0.1.0"
