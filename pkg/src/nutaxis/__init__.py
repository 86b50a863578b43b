"""Simulator and verification harness for a degenerate nutrient-taxis model.

The density diffuses and drifts with mobilities that vanish together with
the nutrient, so solutions are built as limits of epsilon-shifted runs; the
monitor checks every quantitative estimate the construction guarantees.
"""

from .grid import Field, Grid, face_gradient, integrate, lp_norm, sup_inf
from .elliptic import (
    EllipticOperator,
    SingularSystemError,
    elliptic_residual,
    manufactured_error,
    solve_nutrient,
)
from .stepper import (
    FluxField,
    PositivityError,
    SchemeError,
    StepperParams,
    Trajectory,
    advance,
    compute_flux,
    stable_dt,
    step,
)
from .driver import (
    ConvergenceReport,
    EpsilonFamily,
    ExtractionRefusal,
    FamilyRunError,
    LimitCandidate,
    cauchy_convergence,
    extract_limit,
    run_family,
    snapshot_distances,
)
from .monitor import (
    EstimateRecord,
    FamilyAssessment,
    HolderProbe,
    ResidualProbe,
    WeakResidualResult,
    check_consumption,
    check_harnack,
    check_loggrad_identity,
    check_mass_bounds,
    check_v_bounds,
    evaluate_family,
    evaluate_trajectory,
    fit_holder_exponent,
    track_lp_dissipation,
    weak_residual,
)
from .scenario import Scenario, ScenarioError, load_scenario, parse_scenario

__version__ = "0.1.0"
