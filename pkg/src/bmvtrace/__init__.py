"""Exact and high-precision analysis of matrix trace functions t -> tr f(A+tB).

Closed-form derivatives via divided-difference loop sums, complete
monotonicity sign reports, equivalent polynomial/kernel formulations, loop
bounds, and an exact integer-valued integrand example with a search harness
around it.
"""

from .errors import DomainError, NumericalError, RangeError
from .exactnum import (
    DEFAULT_PRECISION,
    ExactInt,
    ExactRational,
    GaussianRational,
    Log2Multiple,
    exp_pow2,
    hp_exp,
)
from .linalg import (
    EigenFrame,
    GramRows,
    HermitianMatrix,
    NotPositiveSemidefinite,
    complex_matrix_exp,
    eigen_decompose,
    gram_rows,
    hermitian_function,
    ldl_decompose,
    to_eigenframe,
)
from .divdiff import (
    DivDiffTable,
    Exp,
    FunctionSpec,
    MonotoneRep,
    NodeList,
    Resolvent,
    Scaled,
    divdiff_exp_opitz,
    divdiff_hermite_quadrature,
    divdiff_resolvent_product,
    divdiff_table,
    divided_difference,
    laplace_lemma_gap,
    parse_function_spec,
    scaling_identity_gap,
)
from .traceder import (
    DerivativeReport,
    complete_monotonicity_report,
    shift_frame,
    trace_derivative,
    trace_derivative_exp,
    trace_derivative_fd,
)
from .formulations import (
    MPositiveProbe,
    PolyCoefficients,
    m_positive_check,
    poly_coefficients,
    poly_coefficients_oracle,
    positive_type_check,
)
from .loops import (
    GOLDEN_MODIFIED_VALUE,
    GOLDEN_NEGATIVE_VALUE,
    IntegrandPoint,
    IntegrandValue,
    LoopSpec,
    VectorFamily,
    canonical_loop_value,
    fan_family,
    loop_bound,
    loop_min_search,
    loop_value,
    reference_example,
    reference_example_value,
    third_derivative_value,
    triple_integrand,
)
from .search import SearchConfig, SearchRecord, resume, run_search

__version__ = "0.1.0"
