"""Subgradient descent with geometrically decaying step sizes.

Linear convergence is certified through the condition number
``inf <u, x - x*> / (||u|| ||x - x*||)`` over Clarke subgradients.
"""

from .analysis import (
    ConditionSpec,
    LemmaVerdict,
    PropertyReport,
    check_lipschitz,
    check_quasar_convexity,
    check_sharpness,
    check_weak_convexity,
    estimate_condition_number,
    verify_lemma_bounds,
)
from .descent import (
    Constant,
    DescentConfig,
    GeometricBanded,
    GeometricExact,
    Polyak,
    Trace,
    resolve_schedule,
    run,
    run_suite,
    step_size,
)
from .errors import (
    ConfigurationError,
    ContractViolation,
    GeoSubgradError,
    InvalidInputError,
    NumericFailureError,
    UnknownProblemError,
)
from .harness import BoundReport, compare_schedules, verify_bound
from .oracle import (
    Certified,
    MinimizerSet,
    ProblemInstance,
    SubgradientSample,
    dist_to_minimizers,
    get_problem,
    make_example1,
    make_example2,
    make_example3,
    make_example4,
    make_sharp_abs,
)

__version__ = "0.1.0"
