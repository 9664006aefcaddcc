"""Laboratory for fairness-constrained learning from biased training data.

A two-group threshold learning problem where group B's training rows are
selectively dropped or label-flipped: exact region-mass algebra decides when
constrained empirical risk minimization still returns the reference
classifier, and a seeded Monte Carlo engine checks the same story at finite
sample sizes.
"""

from .bias import (
    BiasParams,
    RegionMasses,
    apply_bias,
    estimate_beta,
    estimate_nu,
    region_masses,
)
from .distribution import (
    GROUP_A,
    GROUP_B,
    Dataset,
    DeviationParams,
    LabeledExample,
    TrueModel,
    analytic_true_error,
    base_rate,
    dataset_from_csv,
    dataset_to_csv,
    predict,
    sample_true,
    thresholds_to_deviations,
    validate_deviations,
    validate_model,
)
from .errors import (
    DegenerateDenominator,
    InsufficientData,
    NoFeasiblePoint,
    RangeError,
)
from .fairness import (
    ConstraintKind,
    Criterion,
    biased_fpr,
    biased_positive_rate,
    biased_tpr,
    constraint_gap,
    constraint_level,
    empirical_rates,
    empirical_tolerance,
    satisfies,
)
from .recovery import (
    AxisSpec,
    Certificate,
    ConditionReport,
    FailureExtreme,
    RegionSweep,
    Verdict,
    check_conditions,
    recheck_sweep_csv,
    recovery_region,
    strong_recovery_certificate,
    sweep_to_csv,
)
from .simulate import (
    ExperimentConfig,
    ExperimentResult,
    Intervention,
    InterventionKind,
    TableCell,
    TableResult,
    classify_thresholds,
    default_table_cells,
    intervention_table,
    run_experiment,
)
from .solver import (
    ALL_NEGATIVE,
    ALL_POSITIVE,
    BAYES,
    Candidate,
    SolveReport,
    biased_error,
    empirical_weighted_risk,
    exact_constrained_erm,
    grid_constrained_erm,
    labelbias_z,
    reweight_labelbias,
    reweight_underrep,
    shrink,
    solve_report_to_json,
)
from .verify import SUITE_NAMES, SuiteResult, run_all, run_suite

__version__ = "0.1.0"

__all__ = [
    "ALL_NEGATIVE",
    "ALL_POSITIVE",
    "AxisSpec",
    "BAYES",
    "BiasParams",
    "Candidate",
    "Certificate",
    "ConditionReport",
    "ConstraintKind",
    "Criterion",
    "Dataset",
    "DegenerateDenominator",
    "DeviationParams",
    "ExperimentConfig",
    "ExperimentResult",
    "FailureExtreme",
    "GROUP_A",
    "GROUP_B",
    "InsufficientData",
    "Intervention",
    "InterventionKind",
    "LabeledExample",
    "NoFeasiblePoint",
    "RangeError",
    "RegionMasses",
    "RegionSweep",
    "SUITE_NAMES",
    "SolveReport",
    "SuiteResult",
    "TableCell",
    "TableResult",
    "TrueModel",
    "Verdict",
    "analytic_true_error",
    "apply_bias",
    "base_rate",
    "biased_error",
    "biased_fpr",
    "biased_positive_rate",
    "biased_tpr",
    "check_conditions",
    "classify_thresholds",
    "constraint_gap",
    "constraint_level",
    "dataset_from_csv",
    "dataset_to_csv",
    "default_table_cells",
    "empirical_rates",
    "empirical_tolerance",
    "empirical_weighted_risk",
    "estimate_beta",
    "estimate_nu",
    "exact_constrained_erm",
    "grid_constrained_erm",
    "intervention_table",
    "labelbias_z",
    "predict",
    "recheck_sweep_csv",
    "recovery_region",
    "region_masses",
    "reweight_labelbias",
    "reweight_underrep",
    "run_all",
    "run_experiment",
    "run_suite",
    "sample_true",
    "satisfies",
    "shrink",
    "solve_report_to_json",
    "strong_recovery_certificate",
    "sweep_to_csv",
    "thresholds_to_deviations",
    "validate_deviations",
    "validate_model",
]
