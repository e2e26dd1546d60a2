"""Manifold-valued structured prediction.

Kernel ridge scores are learned at training time; at prediction time the
weighted sum of squared geodesic distances to the training outputs is
minimized directly on the output manifold by Riemannian gradient descent.
"""

from manisp.errors import (
    DegenerateStepError,
    EigenSolverError,
    IllConditionedError,
    NotPositiveDefiniteError,
    NumericalFailure,
    SingularConfigurationError,
)
from manisp.manifolds import SPD, Euclidean, Simplex, Sphere, manifold_from_dict
from manisp.kernelscores import ScoreModel, fit_scores, gaussian_kernel, scores
from manisp.rgd import RgdConfig, RgdTrace, minimize
from manisp.estimator import (
    CvGrid,
    Dataset,
    PredictorModel,
    cross_validate,
    predict,
    train,
)
from manisp.baseline import KrlsModel, krls_predict, krls_train

__version__ = "0.1.0"

__all__ = [
    "SPD",
    "CvGrid",
    "Dataset",
    "DegenerateStepError",
    "EigenSolverError",
    "Euclidean",
    "IllConditionedError",
    "KrlsModel",
    "NotPositiveDefiniteError",
    "NumericalFailure",
    "PredictorModel",
    "RgdConfig",
    "RgdTrace",
    "ScoreModel",
    "Simplex",
    "SingularConfigurationError",
    "Sphere",
    "cross_validate",
    "fit_scores",
    "gaussian_kernel",
    "krls_predict",
    "krls_train",
    "manifold_from_dict",
    "minimize",
    "predict",
    "scores",
    "train",
]
