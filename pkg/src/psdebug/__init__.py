"""Root-cause ranking of training labels for test misclassifications.

Training labels are scored by their probability of sufficiency (PS) for an
observed error, estimated over counterfactual relabelings with gray-box
surrogates of logistic regression and gradient-boosted trees.
"""

from .dataset import (
    Dataset,
    LabeledPoint,
    NoiseRecord,
    NoiseSpec,
    Selector,
    gen_2gauss,
    gen_concentric,
    inject_noise,
    load_csv,
    save_csv,
    split,
)
from .gbdt import GBDTHyper, GBDTModel, GBDTProfile, gbdt_classify, gbdt_score, train_gbdt
from .logreg import LRHyper, LRModel, LRProfile, evaluation_score, lr_classify, sigmoid, train_lr
from .ps import PriorConfig, PSEstimate, PSReport, estimate_ps, exact_ps, naive_ps, rank_and_threshold
from .surrogate import (
    LinearSurrogate,
    build_gbdt_surrogate,
    build_lr_surrogate,
    decision,
    flip_delta,
    margin,
    predicate_holds,
)

__version__ = "0.1.0"
