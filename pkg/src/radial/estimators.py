"""Label-probability estimators over a neighbor profile, plus the classifier.

Every estimator returns an :class:`Estimate` whose ``value`` is the
estimated probability that the query's label is 1. Polynomial variants may
step outside [0, 1]; values are deliberately not clipped before
classification since thresholding alone decides.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit, logit

from . import localfit
from .core import Dataset, NeighborProfile, as_covariate
from .errors import DimensionMismatch, EmptyWindowError, ParameterError
from .localfit import (
    LogisticConfig,
    MultivariatePoly,
    RadialEvenPoly,
    RadialPoly,
    WeightedSample,
)


@dataclass(frozen=True)
class Diagnostics:
    used_points: int
    converged: bool = True
    fallback_applied: bool = False


@dataclass(frozen=True)
class Estimate:
    value: float
    diagnostics: Diagnostics

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ParameterError(f"estimate value must be finite, got {self.value!r}")


# ---------------------------------------------------------------------------
# Weight functions and scopes for the radial estimators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstantOne:
    def __call__(self, radii: np.ndarray) -> np.ndarray:
        return np.ones_like(radii)


@dataclass(frozen=True)
class InverseRadius:
    """w(r) = 1 / max(r, eps), eps tied to the largest in-scope radius.

    The cap keeps duplicates of the query (r = 0) finite while letting
    their weight dominate, which is the natural limit of 1/r weighting.
    """

    def __call__(self, radii: np.ndarray) -> np.ndarray:
        largest = radii.max(initial=0.0)
        eps = 1e-12 * (largest if largest > 0 else 1.0)
        return 1.0 / np.maximum(radii, eps)


@dataclass(frozen=True)
class Boxcar:
    h: float

    def __post_init__(self):
        if self.h <= 0:
            raise ParameterError("bandwidth must be positive")

    def __call__(self, radii: np.ndarray) -> np.ndarray:
        return (radii <= self.h).astype(np.float64)


@dataclass(frozen=True)
class UniformInBall:
    """w(r) = 1/N inside radius ``r_tilde`` and 0 outside, N the inside count."""

    r_tilde: float

    def __post_init__(self):
        if self.r_tilde <= 0:
            raise ParameterError("cutoff radius must be positive")

    def __call__(self, radii: np.ndarray) -> np.ndarray:
        inside = radii <= self.r_tilde
        n = int(inside.sum())
        if n == 0:
            return np.zeros_like(radii)
        return inside / n


WeightFunction = ConstantOne | InverseRadius | Boxcar | UniformInBall


@dataclass(frozen=True)
class AllPoints:
    def select(self, radii: np.ndarray) -> np.ndarray:
        return np.ones(radii.shape[0], dtype=bool)


@dataclass(frozen=True)
class WithinRadius:
    h: float

    def select(self, radii: np.ndarray) -> np.ndarray:
        return radii <= self.h


@dataclass(frozen=True)
class NearestCount:
    k: int

    def select(self, radii: np.ndarray) -> np.ndarray:
        if not 1 <= self.k <= radii.shape[0]:
            raise ParameterError(f"k must be in [1, {radii.shape[0]}], got {self.k}")
        mask = np.zeros(radii.shape[0], dtype=bool)
        mask[: self.k] = True
        return mask


Scope = AllPoints | WithinRadius | NearestCount


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------


def kernel_smoother(profile: NeighborProfile, h: float) -> Estimate:
    """Mean label over the ball of radius ``h`` around the query (boxcar)."""
    if h <= 0:
        raise ParameterError("bandwidth must be positive")
    inside = profile.radii <= h
    used = int(inside.sum())
    if used == 0:
        raise EmptyWindowError(f"no point within bandwidth {h}")
    return Estimate(float(profile.labels[inside].mean()), Diagnostics(used_points=used))


def knn(profile: NeighborProfile, k: int) -> Estimate:
    """Mean label of the k nearest points."""
    n = len(profile)
    if not 1 <= k <= n:
        raise ParameterError(f"k must be in [1, {n}], got {k}")
    return Estimate(float(profile.labels[:k].mean()), Diagnostics(used_points=k))


def _reduce_degree(n_points: int, degree: int, basis_dim) -> tuple[int, bool]:
    """Lower the polynomial degree until the basis fits the window."""
    q = degree
    fallback = False
    while n_points < basis_dim(q) and q > 0:
        q -= 1
        fallback = True
    return q, fallback


def lpor(data: Dataset, profile: NeighborProfile, query, h: float, q: int) -> Estimate:
    """Local polynomial fit of the labels on covariate offsets; value at offset 0."""
    theta, diag = _local_poly(data, profile, query, h, q, logistic=False)
    return Estimate(float(theta[0]), diag)


def lpolr(
    data: Dataset,
    profile: NeighborProfile,
    query,
    h: float,
    q: int,
    config: LogisticConfig | None = None,
) -> Estimate:
    """Logistic variant of :func:`lpor`; value is sigmoid of the intercept."""
    theta, diag = _local_poly(data, profile, query, h, q, logistic=True, config=config)
    return Estimate(float(expit(theta[0])), diag)


def _local_poly(data, profile, query, h, q, logistic, config=None):
    if h <= 0:
        raise ParameterError("bandwidth must be positive")
    if q < 0:
        raise ParameterError("degree must be >= 0")
    query = as_covariate(query)
    if data.dim is None or data.dim != query.shape[0]:
        raise DimensionMismatch("local polynomial fits need fixed-dimension covariates")
    inside = profile.radii <= h
    used = int(inside.sum())
    if used == 0:
        raise EmptyWindowError(f"no point within bandwidth {h}")

    d = query.shape[0]
    q_eff, fallback = _reduce_degree(used, q, lambda qq: MultivariatePoly(qq, d).output_dim)
    idx = profile.source_indices[inside]
    Z = np.stack([data.points[i].x for i in idx]) - query[None, :]
    features = MultivariatePoly(q_eff, d).expand(Z)
    targets = profile.labels[inside].astype(np.float64)
    weights = np.ones(used)
    if logistic:
        fit = localfit.logistic_fit(WeightedSample(features, targets, weights), config)
        converged = fit.converged
    else:
        fit = localfit.wls_fit(WeightedSample(features, targets, weights))
        converged = True
    return fit.theta, Diagnostics(used, converged, fallback)


def msknn(
    profile: NeighborProfile,
    k_vec: Sequence[int],
    q: int,
    regression: str = "poly",
    loss: str = "squared",
    config: LogisticConfig | None = None,
) -> Estimate:
    """Fit a radial polynomial to k-NN estimates at several scales and
    extrapolate it to radius zero.

    ``regression="poly"`` pairs with the squared loss and returns the raw
    intercept. ``regression="logi"`` returns sigmoid of the intercept and
    pairs with either the logistic loss on the fractional k-NN targets or
    the squared loss on their logit transforms (``loss="logit_squared"``).
    """
    k_vec = [int(k) for k in k_vec]
    n = len(profile)
    if any(k2 <= k1 for k1, k2 in zip(k_vec, k_vec[1:])) or not k_vec:
        raise ParameterError("k_vec must be strictly increasing and nonempty")
    if k_vec[0] < 1 or k_vec[-1] > n:
        raise ParameterError(f"k_vec must lie within [1, {n}]")
    if len(k_vec) < q + 1:
        raise ParameterError(f"need at least q+1 = {q + 1} scales, got {len(k_vec)}")
    valid = {("poly", "squared"), ("logi", "logistic"), ("logi", "logit_squared")}
    if (regression, loss) not in valid:
        raise ParameterError(f"unsupported combination {(regression, loss)!r}")

    ks = np.asarray(k_vec)
    csum = np.cumsum(profile.labels)
    eta_hat = csum[ks - 1] / ks
    r_k = profile.radii[ks - 1]
    features = RadialPoly(q).expand(r_k)
    weights = np.ones(len(ks))

    if loss == "squared":
        fit = localfit.wls_fit(WeightedSample(features, eta_hat, weights))
        value, converged = float(fit.theta[0]), True
    elif loss == "logistic":
        fit = localfit.logistic_fit(WeightedSample(features, eta_hat, weights), config)
        value, converged = float(expit(fit.theta[0])), fit.converged
    else:  # logit_squared
        lo = 1.0 / (2.0 * ks)
        clipped = np.clip(eta_hat, lo, 1.0 - lo)
        fit = localfit.wls_fit(WeightedSample(features, logit(clipped), weights))
        value, converged = float(expit(fit.theta[0])), True
    return Estimate(value, Diagnostics(used_points=int(ks[-1]), converged=converged))


def lrr(
    profile: NeighborProfile,
    weight_fn: WeightFunction,
    q: int,
    loss: str = "squared",
    scope: Scope = AllPoints(),
    even: bool = False,
    config: LogisticConfig | None = None,
) -> Estimate:
    """Radial regression of the raw labels on distance; value at distance 0.

    The squared loss gives the plain intercept; the logistic loss gives
    sigmoid of the intercept (the logistic variant of the method). With
    ``even=True`` the basis uses even powers 1, r^2, ..., r^(2q).
    """
    if loss not in ("squared", "logistic"):
        raise ParameterError(f"loss must be 'squared' or 'logistic', got {loss!r}")
    if q < 0:
        raise ParameterError("degree must be >= 0")
    mask = scope.select(profile.radii)
    radii = profile.radii[mask]
    labels = profile.labels[mask].astype(np.float64)
    weights = weight_fn(radii)
    positive = weights > 0
    n_pos = int(positive.sum())
    if n_pos == 0:
        raise EmptyWindowError("scope and weights leave no usable point")

    def basis(qq):
        if even and qq >= 1:
            return RadialEvenPoly(qq)
        return RadialPoly(0 if even else qq)

    q_eff, fallback = _reduce_degree(n_pos, q, lambda qq: basis(qq).output_dim)
    features = basis(q_eff).expand(radii)
    sample = WeightedSample(features, labels, weights)
    if loss == "squared":
        fit = localfit.wls_fit(sample)
        value, converged = float(fit.theta[0]), True
    else:
        fit = localfit.logistic_fit(sample, config)
        value, converged = float(expit(fit.theta[0])), fit.converged
    return Estimate(value, Diagnostics(n_pos, converged, fallback))


def classify(estimate: Estimate | float) -> int:
    """Plug-in classification: 1 when the estimate reaches 1/2, else 0."""
    value = estimate.value if isinstance(estimate, Estimate) else float(estimate)
    if not np.isfinite(value):
        raise ParameterError("cannot classify a non-finite estimate")
    return 1 if value >= 0.5 else 0


# ---------------------------------------------------------------------------
# Declarative estimator configuration (used by the CLI)
# ---------------------------------------------------------------------------

_WEIGHT_NAMES = {
    "constant_one": ConstantOne,
    "inverse_r": InverseRadius,
}


@dataclass(frozen=True)
class EstimatorSpec:
    """A named estimator with its hyperparameters, applied to (data, query)."""

    kind: str
    params: dict = field(default_factory=dict)

    def apply(self, data: Dataset, profile: NeighborProfile, query) -> Estimate:
        p = self.params
        if self.kind == "ks":
            return kernel_smoother(profile, h=p["h"])
        if self.kind == "knn":
            return knn(profile, k=int(p["k"]))
        if self.kind == "lpor":
            return lpor(data, profile, query, h=p["h"], q=int(p.get("q", 2)))
        if self.kind == "lpolr":
            return lpolr(data, profile, query, h=p["h"], q=int(p.get("q", 2)))
        if self.kind in ("msknn-poly", "msknn-logi"):
            regression = "poly" if self.kind.endswith("poly") else "logi"
            loss = p.get("loss", "squared" if regression == "poly" else "logistic")
            return msknn(profile, p["k_vec"], q=int(p.get("q", 2)), regression=regression, loss=loss)
        if self.kind in ("lrr", "lrlr"):
            weight = _WEIGHT_NAMES[p.get("weight", "constant_one")]()
            loss = "logistic" if self.kind == "lrlr" else p.get("loss", "squared")
            return lrr(profile, weight, q=int(p.get("q", 2)), loss=loss)
        raise ParameterError(f"unknown estimator kind {self.kind!r}")
