"""Node-health classification with second-order boosted trees and exact Shapley explanations."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .data import (
    CANONICAL_SCHEMA,
    FEATURE_NAMES,
    Dataset,
    FeatureSchema,
    TelemetrySample,
    generate_synthetic,
    load_csv,
    train_test_split,
    write_csv,
)
from .explain import (
    BackgroundSet,
    Explanation,
    beeswarm_data,
    dependence_data,
    mean_abs_shap,
    shapley_exact,
    value_function,
    weight_importance,
)
from .gbdt import (
    BoostedModel,
    BoostHyperparams,
    Leaf,
    Split,
    predict_label,
    predict_margin,
    predict_proba,
    train,
)
from .evaluate import compare, knn_predict, metrics, naive_bayes_fit, naive_bayes_predict
