"""Confidence intervals for the out-of-bag error of random forests.

The OOB error comes with three standard errors that reuse the fitted
trees: naive, delta-method-after-bootstrap (infinitesimal jackknife) and
jackknife-after-bootstrap.

>>> from oobci import Dataset, ForestConfig, train_forest, tree_prediction_matrix, se_report
>>> model = train_forest(data, ForestConfig(B=2000, seed=1))        # doctest: +SKIP
>>> rep = se_report(tree_prediction_matrix(model), model.inbag, data.y)  # doctest: +SKIP
"""

__version__ = "0.1.0"

from ._backend import BACKEND
from .errors import (
    ConfigError,
    InputError,
    InsufficientTreesError,
    NonDifferentiableLossError,
    NumericError,
    OOBError,
    TransformError,
)
from .exhaustive import ExhaustiveForest, ToyPredictor, exhaustive_forest
from .forest import (
    Dataset,
    ForestConfig,
    ForestModel,
    Task,
    load_model,
    predict,
    save_model,
    train_forest,
    tree_prediction_matrix,
)
from .intervals import ConfidenceInterval, Method, Transform, build_interval, normal_quantile
from .losses import Loss
from .oob import (
    oob_error,
    oob_predictions,
    oob_summary,
    reweighted_oob_predictions,
    weighted_oob_statistic,
)
from .se import (
    InfluenceVector,
    SEReport,
    Variant,
    classification_delta_influence,
    covariance_adjustment,
    delta_influence,
    delta_plus_se,
    delta_se,
    generic_loss_influence,
    jab_leave_one_out,
    jab_se,
    naive_se,
    se_report,
)
