"""Desk-scale lattice bounds, disjoint-support extraction, l1^k
factorizations, 2-summing estimates, and the sign-pattern counterexample
family for operators into atomic L1."""

from .dichotomy import (
    ConflictBound,
    DisjointFamily,
    EscapeResult,
    EscapeTrace,
    SelectionResult,
    conflict_bound,
    greedy_escape,
    rosenthal_select,
)
from .factorization import (
    GROTHENDIECK_UPPER,
    FactorizationCert,
    JamesResult,
    ProjectionCert,
    build_l1_factorization,
    dor_projection_bound,
    james_improve,
    min_projection,
    pi2_groth,
    pi2_lower,
    pi2_upper_sym,
)
from .lattice import (
    BoundCheck,
    BoundedFactorization,
    ClampedApproximation,
    L1EquivalenceCert,
    LatticeBoundCert,
    l1_equivalence,
    lattice_factorize_approx,
    lattice_factorize_exact,
    min_approx_lattice_bound,
    verify_lattice_bound,
)
from .lp import LPProblem, LPSolution, solve_lp
from .measure import (
    AtomSet,
    AtomSpace,
    L1Fun,
    abs_join,
    pos_excess,
    restrict_norm,
    weighted_norm,
)
from .operators import (
    DomainShape,
    ExtremePoint,
    FiniteOperator,
    apply_operator,
    extreme_points,
    identity_operator,
    operator_norm,
)
from .rademacher import (
    KHINTCHINE_K,
    NORM_THRESHOLD,
    RademacherOperator,
    binom_checks,
    build_rademacher_operator,
    check_diagonal_lattice,
    diag_gap,
    empirical_threshold_m,
    max_admissible_sx,
    perturbation_gap,
    safe_envelope_constant,
    subset_sign_coefficient,
    symmetric_perturbation_bounds,
    truncated_sign_norm,
)
from .randops import (
    ColumnFunction,
    SymmetricRandomMatrixSpec,
    build_symmetric_matrix,
    case_split_test,
    hj_check,
    independent_disjointify,
    khintchine_square_check,
    levy_check,
    square_function_check,
    tail_quantity,
    truncation_split,
)

__version__ = "0.1.0"
