from .decomposition import CrossCovariance, DecompositionResult, decomposition_residual
from .ensemble import (
    CoupledDifference, EnsembleResult, EnsembleSpec, IDSRow, MomentRow, PreparedBox, VarianceEstimate,
    bc_difference, bootstrap_se, ids_estimate, merge_results, moment_scan, run_bc_difference, run_ensemble,
    variance_estimate, variance_scaling,
)
from .formula import summarize_formula_samples, variance_formula
from .localization import DecayFit, GapProfile, combes_thomas_profile, fixed_operator, interior_trace_gap, log_linear_fit
from .normality import NormalityReport, PositivityVerdict, normality_test, positivity_check
