"""Bayesian SEM with approximate-zero priors.

Fits exact-zero (EZ), approximate-zero (AZ), and exploratory (EFA, EFA-C)
factor models to continuous, binary, and ordinal items by HMC; assesses them
with posterior predictive p-values and cross-validated proper scoring rules;
and turns the comparison into one of three recommendations.
"""

__version__ = "0.1.0"

from .assessment import (
    AssessmentReport,
    FoldPlan,
    PatternTable,
    ScoreRecord,
    Verdict,
    assess_models,
    cross_validate,
    decide,
    enumerate_patterns,
    g2_statistic,
    kfold_split,
    log_score_patterns,
    lrt_discrepancy,
    pattern_probability,
    ppp,
    replicate_dataset,
    score_table,
    variogram_score,
    variogram_score_rows,
)
from .convergence import Diagnostics, diagnostics, ess_mean, identified_functions, split_rhat
from .dataio import (
    RunManifest,
    draws_to_csv,
    load_spec,
    read_dataset,
    save_spec,
    sha256_file,
    spec_from_dict,
    spec_to_dict,
    write_dataset,
    write_json,
)
from .fit import Draws, SamplerConfig, child_seed, hmc_run, sign_align
from .likelihood import Posterior
from .model import (
    APPROX_ZERO,
    FIXED,
    FREE,
    Dataset,
    ItemSpec,
    LoadingPattern,
    ModelSpec,
    ParameterSet,
    PriorConfig,
    PsiPrior,
    implied_covariance,
    simple_pattern,
    validate_spec,
)
from .packing import ParameterPacker
from .simulation import (
    RecoveryResult,
    ScenarioTruth,
    SensitivityResult,
    dichotomize,
    ftnd_models,
    generate,
    recovery_experiment,
    scenario_models,
    scenario_truth,
    sensitivity_analysis,
)

__all__ = [name for name in dir() if not name.startswith("_")]
