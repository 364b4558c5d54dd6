"""Empirical predictive-covariance kernel and Gaussian posterior conditioning.

The central object is :class:`KernelState`: a feature map built from
centered ensemble predictions, a homoscedastic noise level, and a
feature-space posterior precision that accumulates conditioning updates.
Every information-theoretic score used by the selection algorithms
(BALD, batch mutual information, joint entropy) is a thin function of it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

__all__ = [
    "PredictionMatrix",
    "NoiseModel",
    "FeatureMap",
    "KernelState",
    "MultinomialHypothesis",
    "center_predictions",
    "multinomial_posterior_gradient_kernel",
]


class InputError(ValueError):
    """Invalid user-supplied data (bad matrix, unknown id, bad config)."""


@dataclass(frozen=True)
class PredictionMatrix:
    """N x K matrix of raw ensemble predictions, one column per member.

    Entry (i, k) is the noise-free prediction of member k at point
    ``ids[i]``, in target units. This is the sole model-facing contract:
    anything that can produce one of these can drive the whole engine.
    """

    ids: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise InputError(f"values must be 2-D, got shape {values.shape}")
        n, k = values.shape
        if ids.shape != (n,):
            raise InputError(f"ids length {ids.shape} does not match {n} rows")
        if k < 2:
            raise InputError(f"need at least 2 ensemble members, got {k}")
        if np.any(ids < 0):
            raise InputError("ids must be non-negative integers")
        if len(np.unique(ids)) != n:
            raise InputError("ids must be unique")
        bad = np.argwhere(~np.isfinite(values))
        if bad.size:
            i, j = bad[0]
            raise InputError(f"non-finite prediction at row {i}, member {j}")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "values", values)

    @property
    def member_count(self) -> int:
        return self.values.shape[1]

    @property
    def n_points(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class NoiseModel:
    """Homoscedastic observation noise, standard deviation in target units."""

    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise InputError(f"sigma must be finite and > 0, got {self.sigma}")

    @property
    def variance(self) -> float:
        return self.sigma * self.sigma


@dataclass(frozen=True)
class FeatureMap:
    """N x D feature matrix; k(x_i, x_j) = <rows[i], rows[j]> before conditioning."""

    ids: np.ndarray
    rows: np.ndarray

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64)
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2:
            raise InputError(f"feature rows must be 2-D, got shape {rows.shape}")
        if ids.shape != (rows.shape[0],):
            raise InputError("ids length does not match feature rows")
        if len(np.unique(ids)) != len(ids):
            raise InputError("ids must be unique")
        if not np.all(np.isfinite(rows)):
            raise InputError("non-finite feature value")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "rows", rows)

    @property
    def dimension(self) -> int:
        return self.rows.shape[1]


def center_predictions(pred: PredictionMatrix) -> FeatureMap:
    """Build the empirical-kernel feature map from raw predictions.

    Row i becomes (mu_i1 - m_i, ..., mu_iK - m_i) / sqrt(K) with m_i the
    row mean, so the Gram matrix of the result is exactly the empirical
    covariance of the member predictions.
    """
    values = pred.values
    k = pred.member_count
    centered = values - values.mean(axis=1, keepdims=True)
    return FeatureMap(ids=pred.ids, rows=centered / math.sqrt(k))


@dataclass(frozen=True)
class MultinomialHypothesis:
    """Categorical weights over the K ensemble members (a point on the simplex)."""

    weights: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.weights, dtype=np.float64)
        if q.ndim != 1 or q.size < 2:
            raise InputError("weights must be a 1-D vector of length >= 2")
        if np.any(q < 0) or not np.all(np.isfinite(q)):
            raise InputError("weights must be finite and non-negative")
        if abs(q.sum() - 1.0) > 1e-9:
            raise InputError(f"weights must sum to 1, got {q.sum()}")
        object.__setattr__(self, "weights", q)

    @classmethod
    def uniform(cls, k: int) -> "MultinomialHypothesis":
        return cls(np.full(k, 1.0 / k))


def multinomial_posterior_gradient_kernel(
    pred: PredictionMatrix, hyp: MultinomialHypothesis
) -> np.ndarray:
    """Gram matrix of the one-hot hypothesis model: M diag(q) M^T - (Mq)(Mq)^T.

    With uniform q this coincides exactly with the empirical
    predictive-covariance Gram of :func:`center_predictions`.
    """
    q = hyp.weights
    if q.size != pred.member_count:
        raise InputError("hypothesis weights length must equal member count")
    m = pred.values
    mean = m @ q
    return (m * q) @ m.T - np.outer(mean, mean)


_LOG_2PIE = math.log(2.0 * math.pi * math.e)


class KernelState:
    """Posterior predictive-covariance kernel over a fixed set of points.

    Holds a feature map, a noise level, and a D x D posterior precision
    ``I + sum_c phi_c phi_c^T / sigma^2`` over all conditioned points.
    Immutable: :meth:`condition_on` returns a new state and the original
    stays valid, so states can be shared read-only across workers.
    """

    def __init__(
        self,
        base: FeatureMap,
        noise: NoiseModel,
        precision: np.ndarray | None = None,
        conditioned_ids: tuple = (),
    ):
        self.base = base
        self.noise = noise
        d = base.dimension
        if precision is None:
            precision = np.eye(d)
        else:
            precision = np.asarray(precision, dtype=np.float64)
            if precision.shape != (d, d):
                raise InputError(f"precision must be {d}x{d}")
        self.precision = precision
        self.conditioned_ids = tuple(conditioned_ids)
        self._pos = {int(i): p for p, i in enumerate(base.ids)}
        # Lower Cholesky of the precision; refreshed on every conditioning
        # step (cheap at D <= a few hundred and numerically transparent).
        self._chol = scipy.linalg.cholesky(precision, lower=True)
        self._post_rows: np.ndarray | None = None

    # -- internals ---------------------------------------------------------

    def _index(self, point_id: int) -> int:
        try:
            return self._pos[int(point_id)]
        except KeyError:
            raise InputError(f"unknown point id {point_id}") from None

    def posterior_features(self, ids: Sequence[int] | None = None) -> np.ndarray:
        """Rows A_i with k_post(i, j) = <A_i, A_j> (i.e. Phi L^-T)."""
        if self._post_rows is None:
            self._post_rows = scipy.linalg.solve_triangular(
                self._chol, self.base.rows.T, lower=True
            ).T
        if ids is None:
            return self._post_rows
        idx = [self._index(i) for i in ids]
        return self._post_rows[idx]

    # -- kernel queries ----------------------------------------------------

    def kernel_value(self, i: int, j: int) -> float:
        a = self.posterior_features()
        return float(a[self._index(i)] @ a[self._index(j)])

    def observation_covariance(self, i: int, j: int) -> float:
        k = self.kernel_value(i, j)
        return k + (self.noise.variance if int(i) == int(j) else 0.0)

    def marginal_variances(self, ids: Sequence[int] | None = None) -> np.ndarray:
        a = self.posterior_features(ids)
        return np.einsum("ij,ij->i", a, a)

    def gram(self, ids: Sequence[int] | None = None) -> np.ndarray:
        a = self.posterior_features(ids)
        return a @ a.T

    # -- conditioning ------------------------------------------------------

    def condition_on(self, point_id: int) -> "KernelState":
        """Condition on one noisy observation at ``point_id``.

        Not idempotent: conditioning twice models two independent noisy
        observations and shrinks the variance further.
        """
        phi = self.base.rows[self._index(point_id)]
        precision = self.precision + np.outer(phi, phi) / self.noise.variance
        return KernelState(
            self.base,
            self.noise,
            precision,
            self.conditioned_ids + (int(point_id),),
        )

    def condition_on_all(self, ids: Sequence[int]) -> "KernelState":
        if len(ids) == 0:
            return self
        idx = [self._index(i) for i in ids]
        phis = self.base.rows[idx]
        precision = self.precision + phis.T @ phis / self.noise.variance
        return KernelState(
            self.base,
            self.noise,
            precision,
            self.conditioned_ids + tuple(int(i) for i in ids),
        )

    # -- information-theoretic scores ---------------------------------------

    def joint_entropy(self, subset: Sequence[int]) -> float:
        """0.5 logdet(K_SS + sigma^2 I) + (n/2) log(2 pi e); empty set -> 0."""
        n = len(subset)
        if n == 0:
            return 0.0
        cov = self.gram(subset) + self.noise.variance * np.eye(n)
        sign, logdet = np.linalg.slogdet(cov)
        if sign <= 0:
            raise InputError("covariance matrix numerically singular")
        return 0.5 * logdet + 0.5 * n * _LOG_2PIE

    def batch_mutual_information(self, subset: Sequence[int]) -> float:
        """0.5 logdet(K_SS / sigma^2 + I); non-negative, 0 for the empty set."""
        n = len(subset)
        if n == 0:
            return 0.0
        m = self.gram(subset) / self.noise.variance + np.eye(n)
        sign, logdet = np.linalg.slogdet(m)
        if sign <= 0:
            raise InputError("mutual-information matrix numerically singular")
        return max(0.5 * logdet, 0.0)

    def bald_score(self, point_id: int) -> float:
        return 0.5 * math.log1p(self.kernel_value(point_id, point_id) / self.noise.variance)


def state_from_predictions(pred: PredictionMatrix, sigma: float) -> KernelState:
    """Convenience constructor: centered empirical kernel + noise level."""
    return KernelState(center_predictions(pred), NoiseModel(sigma))
