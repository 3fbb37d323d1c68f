"""Bias-corrected local regression classifiers with radial designs.

Local label-probability estimators (kernel smoother, k-NN, local
polynomial and multiscale variants, and local radial regression with
squared or logistic loss), distance metrics for fixed- and variable-length
covariates, plus benchmark, theory-verification, and walk-forward
backtesting harnesses.
"""

from .core import (
    Dataset,
    LabeledPoint,
    NeighborProfile,
    as_covariate,
    dtw,
    euclidean,
    get_metric,
    idtw,
    profile,
    strict_floor,
)
from .estimators import (
    AllPoints,
    Boxcar,
    ConstantOne,
    Estimate,
    EstimatorSpec,
    InverseRadius,
    NearestCount,
    UniformInBall,
    WithinRadius,
    classify,
    kernel_smoother,
    knn,
    lpolr,
    lpor,
    lrr,
    msknn,
)
from .localfit import (
    FitResult,
    LogisticConfig,
    MultivariatePoly,
    RadialEvenPoly,
    RadialPoly,
    WeightedSample,
    evaluate,
    logistic_fit,
    wls_fit,
)

__version__ = "0.1.0"

__all__ = [
    "AllPoints",
    "Boxcar",
    "ConstantOne",
    "Dataset",
    "Estimate",
    "EstimatorSpec",
    "FitResult",
    "InverseRadius",
    "LabeledPoint",
    "LogisticConfig",
    "MultivariatePoly",
    "NearestCount",
    "NeighborProfile",
    "RadialEvenPoly",
    "RadialPoly",
    "UniformInBall",
    "WeightedSample",
    "WithinRadius",
    "as_covariate",
    "classify",
    "dtw",
    "euclidean",
    "evaluate",
    "get_metric",
    "idtw",
    "kernel_smoother",
    "knn",
    "logistic_fit",
    "lpolr",
    "lpor",
    "lrr",
    "msknn",
    "profile",
    "strict_floor",
    "wls_fit",
]
