"""Discovery of subgroups with exceptional survival in time-to-event data."""

from .dataset import SurvivalDataset, load_csv, save_csv, unique_event_times
from .errors import (ConfigError, DataValidationError, EstimationError, GenerationError, GridError,
                     ParseError, ShapeError, SurvGroupError)
from .learner import (LearnerConfig, SubgroupResult, discover, exceptionality_vector,
                      full_objective, learn_subgroup, soft_objective)
from .pruner import PruneConfig, jaccard, prune_rule
from .rsf import Forest, ForestConfig, SurvivalMatrix, fit_forest, population_curve, predict_matrix
from .softrule import (Condition, HardRule, SoftRuleParams, harden, membership, soft_condition,
                       soft_rule)
from .survival import (StepCurve, kaplan_meier, logrank_statistic, mean_shift, restricted_mean,
                       trapezoid_abs_diff)
from .synth import PlantedTruth, SynthConfig, make_survival_data, recovery_f1
from .validator import NullModel, bonferroni, build_dfd, p_value

__version__ = "0.1.0"

__all__ = [
    "SurvivalDataset", "load_csv", "save_csv", "unique_event_times",
    "ConfigError", "DataValidationError", "EstimationError", "GenerationError", "GridError",
    "ParseError", "ShapeError", "SurvGroupError",
    "LearnerConfig", "SubgroupResult", "discover", "exceptionality_vector", "full_objective",
    "learn_subgroup", "soft_objective",
    "PruneConfig", "jaccard", "prune_rule",
    "Forest", "ForestConfig", "SurvivalMatrix", "fit_forest", "population_curve", "predict_matrix",
    "Condition", "HardRule", "SoftRuleParams", "harden", "membership", "soft_condition", "soft_rule",
    "StepCurve", "kaplan_meier", "logrank_statistic", "mean_shift", "restricted_mean",
    "trapezoid_abs_diff",
    "PlantedTruth", "SynthConfig", "make_survival_data", "recovery_f1",
    "NullModel", "bonferroni", "build_dfd", "p_value",
]
