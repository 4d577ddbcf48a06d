"""Generalized Diversity-Interactions modelling.

Regression models for biodiversity-and-ecosystem-function data: ecosystem
responses are expressed as species identity effects plus pairwise interaction
effects proportional to ``(p_i * p_j) ** theta``, with the exponent estimated
by profile likelihood. The package covers simplex design construction, six
interaction structures, exponent estimation with profile-likelihood
confidence intervals, three model-selection procedures, and a reproducible
Monte Carlo study engine, plus scikit-learn style estimators and a CLI.
"""

__version__ = "0.1.0"

from .design import (
    Community,
    Design,
    cross_with_structure,
    design_from_rows,
    equiproportional_design,
    four_species_design,
    load_dataset_csv,
    load_design_csv,
    make_community,
    nine_species_design,
    save_dataset_csv,
    save_design_csv,
)
from .estimators import DIRegressor, InteractionSelector
from .exceptions import GdiError
from .fitting import FitResult, FTestResult, aic, bic, f_test, ols
from .interactions import (
    ADDITIVE_SPECIES,
    AVERAGE_PAIRWISE,
    COMMUNITY_FACTOR,
    FAMILIES,
    FULL_PAIRWISE,
    FUNCTIONAL_GROUP,
    IDENTITY,
    NULL,
    InteractionSpec,
    ModelMatrix,
    design_matrix,
    interaction_columns,
    nested,
    pair_term,
    scaling_factor,
)
from .profile import (
    LRTestResult,
    ThetaEstimate,
    estimate_theta,
    lr_test_theta,
    profile_loglik,
    theta_ci,
)
from .selection import (
    SelectionResult,
    default_candidates,
    lack_of_fit,
    procedure_a,
    procedure_b,
    procedure_c,
    select,
)
from .simulate import (
    StudyConfig,
    StudySummary,
    TruthModel,
    dataset_rng,
    four_species_truth,
    nine_species_truth,
    normal_draw,
    run_reparam_study,
    run_robustness_study,
    run_selection_study,
    simulate_response,
)

__all__ = [
    "__version__",
    "Community", "Design", "make_community", "design_from_rows",
    "four_species_design", "nine_species_design", "equiproportional_design",
    "cross_with_structure", "load_design_csv", "save_design_csv",
    "load_dataset_csv", "save_dataset_csv",
    "InteractionSpec", "ModelMatrix", "design_matrix", "interaction_columns",
    "pair_term", "scaling_factor", "nested",
    "FAMILIES", "NULL", "IDENTITY", "AVERAGE_PAIRWISE", "FUNCTIONAL_GROUP",
    "ADDITIVE_SPECIES", "FULL_PAIRWISE", "COMMUNITY_FACTOR",
    "FitResult", "FTestResult", "ols", "aic", "bic", "f_test",
    "ThetaEstimate", "LRTestResult", "estimate_theta", "profile_loglik",
    "theta_ci", "lr_test_theta",
    "SelectionResult", "default_candidates", "select",
    "procedure_a", "procedure_b", "procedure_c", "lack_of_fit",
    "TruthModel", "StudyConfig", "StudySummary", "simulate_response",
    "dataset_rng", "normal_draw", "four_species_truth", "nine_species_truth",
    "run_robustness_study", "run_selection_study", "run_reparam_study",
    "DIRegressor", "InteractionSelector",
    "GdiError",
]
