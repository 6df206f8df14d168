"""Integral functionals on grids: duality checks, Clarke calculus, Bolza problems and sweeping processes."""

from .grid import (
    Curve,
    DiscreteMeasure,
    Report,
    ReportKind,
    StepFunction,
    StructuralError,
    TimeGrid,
    seeded_rng,
)
from .integrand import IntegrandOracle, from_description
from .duality import (
    IntegralFunctional,
    argmin_equivalence,
    conjugate_of_integral,
    eps_subdiff_membership,
    expected_conjugate,
    verify_interchange,
)
from .clarke import ClarkeEstimatorConfig, clarke_dirderiv, clarke_upper_bound_check, integral_clarke_inclusion
from .calcvar import BolzaProblem, adjoint_reconstruct, estimate_K0, euler_lagrange_residual, solve
from .sweeping import catching_up, check_differential_measure, check_integral_solution, equivalence_report

__version__ = "0.1.0"
