"""Black-box batch active learning for regression.

Turns an N x K matrix of ensemble predictions into an empirical
predictive-covariance kernel and runs kernel-based batch acquisition
(BALD, MaxDet/BatchBALD, BADGE, Core-Set, LCMD, BAIT), plus an
experiment harness with native ensemble models and a uniform baseline.
"""

__version__ = "0.1.0"

from .kernels import (
    FeatureMap,
    InputError,
    KernelState,
    MultinomialHypothesis,
    NoiseModel,
    PredictionMatrix,
    center_predictions,
    multinomial_posterior_gradient_kernel,
    state_from_predictions,
)
from .models import (
    BayesianLinearModel,
    Dataset,
    EnsembleSpec,
    FittedEnsemble,
    fit_ensemble,
    predict_members,
)
from .rng import SequenceStream, UniformStream, mix64
from .selection import (
    METHODS,
    SelectionRequest,
    SelectionResult,
    select_badge_kmeanspp,
    select_bait_forward,
    select_bald_topk,
    select_coreset_maxdist,
    select_lcmd,
    select_maxdet_batchbald,
    select_uniform,
)
from .harness import (
    ExperimentConfig,
    RoundRecord,
    compute_metrics,
    emit_results,
    generate_friedman1,
    run_active_learning,
)
