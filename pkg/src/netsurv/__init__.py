"""Net survival from registry data without cause-of-death labels.

Disease and other-cause lifetimes are linked by an Archimedean copula at a
chosen Kendall's tau; the disease marginal is estimated by censored maximum
likelihood against all-cause follow-up, with life-table or parametric
other-cause mortality. Sensitivity to the untestable dependence level is
explored by sweeping tau.
"""

from .copulas import CopulaSpec, diagonal, sample_pairs, tau_from_theta, theta_from_tau
from .errors import (
    CalibrationError,
    CoverageError,
    DegeneracyError,
    DomainError,
    FitError,
    ModelInconsistencyError,
    NetsurvError,
    ParseError,
    StudyError,
)
from .inference import (
    FitResult,
    NetSurvivalEstimate,
    fit,
    net_survival,
    observed_information,
    sensitivity_sweep,
)
from .lifetable import (
    LifeTable,
    PopulationCurve,
    SubjectRecord,
    cumulative_hazard_to_rates,
    load_hmd,
    match_subject,
    parse_hmd,
    read_cohort,
)
from .likelihood import LikelihoodProblem, build_problem, build_problem_from_cohort
from .marginals import ExpWeibull, Exponential, PiecewiseExponential, Weibull
from .pohar_perme import PPEstimate, pohar_perme
from .simulate import (
    SimulationConfig,
    SimulationReport,
    calibrate_censoring,
    generate_cohort,
    run_misspecification_study,
    run_study,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
