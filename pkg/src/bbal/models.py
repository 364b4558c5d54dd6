"""Native ensemble regressors behind the prediction-matrix contract.

Three member families:

* ``random_feature_ridge`` -- ridge regression on random cosine features,
  giving smooth nonlinear members;
* ``bagged_trees`` -- variance-reduction CART regression trees on
  bootstrap resamples with per-split feature subsampling;
* ``exact_bayes_linear`` -- conjugate Gaussian linear model whose
  posterior is available in closed form, used as the analytic oracle for
  the kernel identities.

Members differ by bootstrap resampling plus member-specific randomness;
member k of a spec with seed s is seeded by mix64(s, k), so fits are
reproducible and members are independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .kernels import InputError, PredictionMatrix
from .rng import mix64

__all__ = [
    "Dataset",
    "EnsembleSpec",
    "FittedEnsemble",
    "BayesianLinearModel",
    "fit_ensemble",
    "predict_members",
]


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    targets: np.ndarray
    name: str | None = None

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.targets, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise InputError(f"features must be a non-empty 2-D matrix, got {x.shape}")
        if y.shape != (x.shape[0],):
            raise InputError("targets length must match feature rows")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InputError("non-finite dataset entry")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "targets", y)

    @property
    def n_points(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class EnsembleSpec:
    kind: str  # random_feature_ridge | bagged_trees | exact_bayes_linear
    member_count: int = 10
    seed: int = 0
    # random_feature_ridge
    n_random_features: int = 256
    ridge: float = 1e-2
    # bagged_trees
    max_depth: int = 12
    min_leaf: int = 3
    features_per_split: int | None = None  # default ceil(d / 3)
    bootstrap_only: bool = False  # disable non-bootstrap member randomness
    # exact_bayes_linear
    sigma: float = 0.1

    def __post_init__(self):
        if self.kind not in ("random_feature_ridge", "bagged_trees", "exact_bayes_linear"):
            raise InputError(f"unknown ensemble kind {self.kind!r}")
        if self.member_count < 2:
            raise InputError("member_count must be >= 2")


# -- random cosine-feature ridge members ---------------------------------------


@dataclass
class RandomFeatureRidgeMember:
    frequencies: np.ndarray  # d x m
    offsets: np.ndarray      # m
    weights: np.ndarray      # m
    boot_index: np.ndarray

    def basis(self, x: np.ndarray) -> np.ndarray:
        m = self.offsets.size
        return math.sqrt(2.0 / m) * np.cos(x @ self.frequencies + self.offsets)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.basis(x) @ self.weights


def _median_pairwise_distance(x: np.ndarray) -> float:
    n = x.shape[0]
    if n < 2:
        return 1.0
    sq = np.einsum("ij,ij->i", x, x)
    d2 = sq[:, None] + sq[None, :] - 2.0 * x @ x.T
    iu = np.triu_indices(n, k=1)
    med = float(np.median(np.sqrt(np.maximum(d2[iu], 0.0))))
    return med if med > 0 else 1.0


def _fit_rff_member(x, y, spec: EnsembleSpec, lengthscale: float, seed: int,
                    bootstrap: bool = True) -> RandomFeatureRidgeMember:
    rng = np.random.default_rng(seed)
    n, d = x.shape
    boot = rng.integers(0, n, n) if bootstrap else np.arange(n)
    m = spec.n_random_features
    freqs = rng.standard_normal((d, m)) / lengthscale
    offsets = rng.uniform(0.0, 2.0 * math.pi, m)
    member = RandomFeatureRidgeMember(freqs, offsets, np.zeros(m), boot)
    z = member.basis(x[boot])
    lhs = z.T @ z + spec.ridge * np.eye(m)
    member.weights = scipy.linalg.solve(lhs, z.T @ y[boot], assume_a="pos")
    return member


# -- CART regression trees -------------------------------------------------------


class RegressionTree:
    """Array-compact CART tree minimizing within-node squared error."""

    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def _new_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.feature) - 1

    def fit(self, x: np.ndarray, y: np.ndarray, rng: np.random.Generator,
            max_depth: int, min_leaf: int, m_features: int) -> "RegressionTree":
        d = x.shape[1]
        root = self._new_node()
        stack = [(root, np.arange(x.shape[0]), 0)]
        while stack:
            node, idx, depth = stack.pop()
            ys = y[idx]
            self.value[node] = float(ys.mean())
            if depth >= max_depth or idx.size < 2 * min_leaf or np.ptp(ys) == 0.0:
                continue
            if m_features < d:
                cand = rng.choice(d, m_features, replace=False)
            else:
                cand = np.arange(d)
            best = None  # (sse, feature, threshold)
            for f in cand:
                xs = x[idx, f]
                order = np.argsort(xs, kind="stable")
                xv, yv = xs[order], ys[order]
                s1 = np.cumsum(yv)
                s2 = np.cumsum(yv * yv)
                n = idx.size
                counts = np.arange(1, n)
                sse_l = s2[:-1] - s1[:-1] ** 2 / counts
                sse_r = (s2[-1] - s2[:-1]) - (s1[-1] - s1[:-1]) ** 2 / (n - counts)
                total = sse_l + sse_r
                valid = (xv[:-1] < xv[1:]) & (counts >= min_leaf) & (n - counts >= min_leaf)
                if not valid.any():
                    continue
                total = np.where(valid, total, np.inf)
                j = int(np.argmin(total))
                if best is None or total[j] < best[0]:
                    best = (float(total[j]), int(f), 0.5 * (xv[j] + xv[j + 1]))
            if best is None:
                continue
            _, f, thr = best
            go_left = x[idx, f] <= thr
            left_idx, right_idx = idx[go_left], idx[~go_left]
            if left_idx.size == 0 or right_idx.size == 0:
                continue
            self.feature[node] = f
            self.threshold[node] = thr
            self.left[node] = self._new_node()
            self.right[node] = self._new_node()
            stack.append((self.right[node], right_idx, depth + 1))
            stack.append((self.left[node], left_idx, depth + 1))
        self._freeze()
        return self

    def _freeze(self):
        self.feature = np.asarray(self.feature, dtype=np.int64)
        self.threshold = np.asarray(self.threshold)
        self.left = np.asarray(self.left, dtype=np.int64)
        self.right = np.asarray(self.right, dtype=np.int64)
        self.value = np.asarray(self.value)

    def predict(self, x: np.ndarray) -> np.ndarray:
        out = np.empty(x.shape[0])
        stack = [(0, np.arange(x.shape[0]))]
        while stack:
            node, idx = stack.pop()
            if idx.size == 0:
                continue
            if self.left[node] < 0:
                out[idx] = self.value[node]
                continue
            go_left = x[idx, self.feature[node]] <= self.threshold[node]
            stack.append((self.left[node], idx[go_left]))
            stack.append((self.right[node], idx[~go_left]))
        return out


@dataclass
class BaggedTreeMember:
    tree: RegressionTree
    boot_index: np.ndarray

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.tree.predict(x)


def _fit_tree_member(x, y, spec: EnsembleSpec, seed: int) -> BaggedTreeMember:
    rng = np.random.default_rng(seed)
    n, d = x.shape
    boot = rng.integers(0, n, n)
    m = d if spec.bootstrap_only else (spec.features_per_split or math.ceil(d / 3))
    tree = RegressionTree().fit(
        x[boot], y[boot], rng, spec.max_depth, spec.min_leaf, min(m, d)
    )
    return BaggedTreeMember(tree, boot)


# -- exact Bayesian linear model --------------------------------------------------


class BayesianLinearModel:
    """Conjugate Gaussian linear model: identity prior, noise sigma^2.

    Features of the dataset are the model's basis, so the gradient of the
    mean function with respect to the weights is the feature row itself
    and the gradient kernel is available exactly.
    """

    def __init__(self, sigma: float):
        if not (math.isfinite(sigma) and sigma > 0):
            raise InputError("sigma must be finite and > 0")
        self.sigma = sigma
        self.mean: np.ndarray | None = None
        self.covariance: np.ndarray | None = None

    def fit(self, x: np.ndarray, y: np.ndarray) -> "BayesianLinearModel":
        x = np.asarray(x, dtype=np.float64)
        d = x.shape[1]
        precision = np.eye(d) + x.T @ x / self.sigma**2
        self.covariance = np.linalg.inv(precision)
        self.covariance = 0.5 * (self.covariance + self.covariance.T)
        if x.shape[0]:
            self.mean = self.covariance @ (x.T @ np.asarray(y) / self.sigma**2)
        else:
            self.mean = np.zeros(d)
        return self

    def prior(self, d: int) -> "BayesianLinearModel":
        self.mean = np.zeros(d)
        self.covariance = np.eye(d)
        return self

    def analytic_gradient_kernel(self, x: np.ndarray) -> np.ndarray:
        """G_ij = phi_i Sigma_w phi_j^T; equals the predictive covariance exactly."""
        x = np.asarray(x, dtype=np.float64)
        return x @ self.covariance @ x.T

    def sample_weights(self, count: int, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        chol = np.linalg.cholesky(
            self.covariance + 1e-14 * np.eye(self.covariance.shape[0])
        )
        return self.mean + rng.standard_normal((count, len(self.mean))) @ chol.T

    def sample_posterior_predictions(self, x: np.ndarray, count: int, seed: int,
                                     ids: Sequence[int] | None = None) -> PredictionMatrix:
        """K noise-free mean-function samples mu(x; w_k), one column per draw."""
        w = self.sample_weights(count, seed)
        values = np.asarray(x) @ w.T
        if ids is None:
            ids = np.arange(values.shape[0])
        return PredictionMatrix(np.asarray(ids), values)


# -- ensembles ---------------------------------------------------------------------


@dataclass
class FittedEnsemble:
    spec: EnsembleSpec
    train_ids: np.ndarray
    members: list
    n_features: int
    linear_model: BayesianLinearModel | None = None

    def predict_members(self, x: np.ndarray, ids: Sequence[int] | None = None) -> PredictionMatrix:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2:
            raise InputError("prediction input must be a 2-D matrix")
        if x.shape[1] != self.n_features:
            raise InputError(f"expected {self.n_features} feature columns, got {x.shape[1]}")
        columns = [m.predict(x) for m in self.members]
        if ids is None:
            ids = np.arange(x.shape[0])
        return PredictionMatrix(np.asarray(ids), np.column_stack(columns))


@dataclass
class _LinearMember:
    weights: np.ndarray

    def predict(self, x: np.ndarray) -> np.ndarray:
        return x @ self.weights


def fit_ensemble(data: Dataset, train_ids: Sequence[int], spec: EnsembleSpec) -> FittedEnsemble:
    train_ids = np.asarray(list(train_ids), dtype=np.int64)
    if train_ids.size == 0:
        raise InputError("train_ids must be non-empty")
    x = data.features[train_ids]
    y = data.targets[train_ids]
    members: list = []
    linear = None
    if spec.kind == "random_feature_ridge":
        lengthscale = _median_pairwise_distance(x)
        for k in range(spec.member_count):
            members.append(_fit_rff_member(x, y, spec, lengthscale, mix64(spec.seed, k)))
    elif spec.kind == "bagged_trees":
        if train_ids.size < 2:
            raise InputError("tree ensembles need at least 2 training points")
        for k in range(spec.member_count):
            members.append(_fit_tree_member(x, y, spec, mix64(spec.seed, k)))
    else:  # exact_bayes_linear
        linear = BayesianLinearModel(spec.sigma).fit(x, y)
        weights = linear.sample_weights(spec.member_count, mix64(spec.seed, 0xB1))
        members = [_LinearMember(w) for w in weights]
    return FittedEnsemble(spec=spec, train_ids=train_ids, members=members,
                          n_features=x.shape[1], linear_model=linear)


def predict_members(ensemble: FittedEnsemble, x: np.ndarray,
                    ids: Sequence[int] | None = None) -> PredictionMatrix:
    return ensemble.predict_members(x, ids)
