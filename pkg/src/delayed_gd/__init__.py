"""Delayed gradient descent with mechanically checked linear-convergence bounds."""
from .constants import (
    HalfInteger,
    StepSizePolicy,
    alpha,
    c_tau,
    d_tau,
    j_constant,
    max_step_pl,
    max_step_strongly_convex,
)
from .core import DelayedRunState, GradientOracle, RunTrace, finite_difference_grad, run
from .problems import (
    LogisticProblem,
    PLLeastSquares,
    ProblemConstants,
    RidgeLSProblem,
    constants_of,
    gen_classification_data,
    gen_pl_data,
    gen_regression_data,
)
from .verify import ViolationReport

__version__ = "0.1.0"
