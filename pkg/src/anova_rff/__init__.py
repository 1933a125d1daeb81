"""ANOVA-boosted sparse random Fourier feature regression.

Discover the significant variable interactions of an unknown
high-dimensional function from scattered samples (independent or
correlated inputs), then fit an interpretable sparse trigonometric model
restricted to those interactions.
"""

from .boosting import BoostConfig, BoostTrace, boost_dependent, boost_independent
from .features import (
    CoefficientVector,
    FeatureMatrix,
    FeatureSet,
    assemble_matrix,
    draw_feature_set,
    predict,
)
from .index_sets import (
    AnovaIndexSet,
    all_subsets_of_order,
    all_subsets_up_to_order,
    downward_closure,
    is_anti_downward_closed,
    prune_to_anti_downward_closed,
    uncovered_subsets,
)
from .sampling import (
    DataDistributionSpec,
    FeatureDensitySpec,
    SampleSet,
    covariance_model,
    evaluate_test_function,
    label_samples,
    sample_data,
    sample_feature_frequencies,
)
from .sensitivity import SensitivityReport, mc_anova_term, mc_variance, sobol_indices_dependent
from .solvers import (
    PenaltyBlocks,
    SolverFailure,
    SolverOptions,
    build_penalty,
    penalized_solve,
    penalty_value,
    ridge_solve_dual,
)
from .sparse_fit import HtpConfig, PruneSchedule, fit_harfe, fit_shrimp, mse

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
