"""Rank-based inference for unweighted relative effects in factorial designs."""

__version__ = "0.1.0"

from .contrasts import (
    HypothesisSpec,
    centering_matrix,
    matrix_rank,
    moore_penrose,
    one_way_hypothesis,
    projection_from_contrast,
    two_way_hypotheses,
)
from .covariance import CovarianceEstimate, covariance_estimate, f1_components, tau_hat, two_sample_variance
from .dataio import load_csv, load_leucocytes
from .effects import (
    EffectEstimates,
    additive_decomposition,
    empirical_effect_function,
    pairwise_effects,
    unweighted_effects,
    weighted_effects,
)
from .errors import (
    DegenerateError,
    DomainError,
    InsufficientReplicationError,
    InternalConsistencyError,
    InvalidContrastError,
    InvalidDataError,
    LayoutError,
    RankFXError,
)
from .inference import (
    ConfidenceInterval,
    TestResult,
    analyze,
    anova_type_statistic,
    ats_box_test,
    ats_eigen_test,
    ats_f_test,
    box_df,
    confidence_intervals,
    kruskal_wallis,
    wald_type_statistic,
)
from .ranks import Dataset, build_rank_tables, midranks
from .simulation import SimSetting, effect_consistency_check, generate_dataset, power_curve, type_one_error
