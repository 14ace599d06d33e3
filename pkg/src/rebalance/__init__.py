"""Estimators for imbalanced binary classification viewed as label shift.

Synthetic rebalancing is the core method; undersampling and the plug-in
reweighting are baselines.  A Gaussian-mixture sweep harness and diagnostic
suites sit on top."""

from .distributions import (
    BALANCED,
    Dataset,
    MixtureSpec,
    TargetSpec,
    bayes_type2_error_balanced,
    bayes_type2_error_observed,
    fstar_gaussian,
    gstar_gaussian,
    sample_observed,
    sample_target,
)
from .divergences import (
    DiscreteDist,
    chi2_discrete,
    maximal_coupling_sample,
    population_minimizer,
    tv_discrete,
)
from .erm import OptimizerOptions, RiskReport, erm_train, evaluate_risk
from .errors import (
    AbsoluteContinuityError,
    ConfigurationError,
    ConvergenceError,
    DegeneratePriorError,
    DegenerateSeparationError,
    DomainError,
    FormulaDomainError,
    InsufficientDataError,
    PipelineError,
    RebalanceError,
)
from .generators import GeneratorSpec, SyntheticBatch, choose_j, generate
from .knn import KnnIndex, knn, max_indegree, rk_stats
from .model import LogisticModel, cross_entropy
from .pipelines import (
    PipelineConfig,
    PluginModel,
    plugin_train,
    rebalance_train,
    run_pipeline,
    train_general_target,
    undersample_train,
)

__version__ = "0.1.0"
