"""Self-check suites for the kernel identities.

Each suite recomputes a quantity along two independent routes (feature
space vs dense Gram algebra, greedy gains vs joint log-determinants,
empirical kernel vs the one-hot hypothesis Gram) on internally generated
random instances and reports the worst residual. ``bbal verify`` runs all
of them and exits non-zero if any residual exceeds its tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import (
    InputError,
    KernelState,
    MultinomialHypothesis,
    NoiseModel,
    PredictionMatrix,
    center_predictions,
    multinomial_posterior_gradient_kernel,
)
from .models import BayesianLinearModel
from .rng import mix64

__all__ = ["CheckResult", "run_all_checks", "gram_conditioned_kernel"]


@dataclass
class CheckResult:
    name: str
    residual: float
    tolerance: float

    @property
    def ok(self) -> bool:
        return self.residual <= self.tolerance


def gram_conditioned_kernel(gram: np.ndarray, cond: list[int], sigma: float,
                            jitter_retry: bool = True) -> np.ndarray:
    """Dense Gram-space conditioning: K - K_C (K_CC + s^2 I)^-1 K_C^T.

    Independent of the feature-space precision route; used as the oracle
    side of the Woodbury equivalence check.
    """
    if not cond:
        return gram.copy()
    c = np.asarray(cond)
    kcc = gram[np.ix_(c, c)] + sigma**2 * np.eye(len(c))
    kxc = gram[:, c]
    try:
        sol = np.linalg.solve(kcc, kxc.T)
    except np.linalg.LinAlgError:
        if not jitter_retry:
            raise
        kcc = kcc + (1e-10 * np.trace(kcc) / len(c)) * np.eye(len(c))
        sol = np.linalg.solve(kcc, kxc.T)
    return gram - kxc @ sol


def _random_predictions(rng: np.random.Generator, n: int, k: int) -> PredictionMatrix:
    return PredictionMatrix(np.arange(n), rng.standard_normal((n, k)) * rng.uniform(0.5, 3.0))


def check_proposition2(seed: int = 0, instances: int = 100, n: int = 50,
                       k: int = 10) -> CheckResult:
    """Empirical kernel == one-hot hypothesis Gram with uniform weights."""
    worst = 0.0
    for t in range(instances):
        rng = np.random.default_rng(mix64(seed, 0x20, t))
        pred = _random_predictions(rng, n, k)
        emp = center_predictions(pred).rows @ center_predictions(pred).rows.T
        hyp = multinomial_posterior_gradient_kernel(pred, MultinomialHypothesis.uniform(k))
        scale = max(np.abs(emp).max(), 1e-300)
        worst = max(worst, float(np.abs(emp - hyp).max() / scale))
    return CheckResult("proposition2-identity", worst, 1e-12)


def check_woodbury(seed: int = 0, instances: int = 100, sigma: float = 0.1) -> CheckResult:
    """Feature-space vs Gram-space conditioning on random instances."""
    worst = 0.0
    for t in range(instances):
        rng = np.random.default_rng(mix64(seed, 0x21, t))
        n = int(rng.integers(3, 21))
        k = int(rng.integers(2, 11))
        pred = _random_predictions(rng, n, k)
        state = KernelState(center_predictions(pred), NoiseModel(sigma))
        n_cond = int(rng.integers(1, n))
        cond = list(rng.choice(n, n_cond, replace=False))
        post = state.condition_on_all(cond).gram()
        oracle = gram_conditioned_kernel(state.gram(), cond, sigma)
        scale = max(np.abs(state.gram()).max(), 1e-300)
        worst = max(worst, float(np.abs(post - oracle).max() / scale))
    return CheckResult("woodbury-equivalence", worst, 1e-8)


def check_chain_rule(seed: int = 0, instances: int = 50, sigma: float = 0.1) -> CheckResult:
    """Batch mutual information equals the sum of stepwise gains."""
    worst = 0.0
    for t in range(instances):
        rng = np.random.default_rng(mix64(seed, 0x22, t))
        n, k = 6, int(rng.integers(2, 9))
        pred = _random_predictions(rng, n, k)
        state = KernelState(center_predictions(pred), NoiseModel(sigma))
        subset = list(rng.permutation(n)[: int(rng.integers(1, n + 1))])
        joint = state.batch_mutual_information(subset)
        st, total = state, 0.0
        for i in subset:
            total += st.bald_score(i)
            st = st.condition_on(i)
        denom = max(abs(joint), 1e-12)
        worst = max(worst, abs(joint - total) / denom)
    return CheckResult("mi-chain-rule", worst, 1e-8)


def check_proposition1_exact(seed: int = 0, sigma: float = 0.3) -> CheckResult:
    """Analytic predictive covariance == analytic gradient kernel for the linear model."""
    rng = np.random.default_rng(mix64(seed, 0x23))
    d, n_train, n_query = 16, 20, 12
    x_train = rng.standard_normal((n_train, d))
    y = rng.standard_normal(n_train)
    model = BayesianLinearModel(sigma).fit(x_train, y)
    xq = rng.standard_normal((n_query, d))
    grad_kernel = model.analytic_gradient_kernel(xq)
    # Predictive covariance route: prior Gram conditioned on the training
    # observations in Gram space.
    x_all = np.vstack([x_train, xq])
    prior = x_all @ x_all.T
    post = gram_conditioned_kernel(prior, list(range(n_train)), sigma)
    pred_cov = post[n_train:, n_train:]
    scale = max(np.abs(grad_kernel).max(), 1e-300)
    resid = float(np.abs(grad_kernel - pred_cov).max() / scale)
    return CheckResult("proposition1-exactness", resid, 1e-10)


def run_all_checks(sigma: float = 0.1, seed: int = 0) -> list[CheckResult]:
    if sigma <= 0:
        raise InputError("verification requires sigma > 0")
    return [
        check_proposition2(seed),
        check_woodbury(seed, sigma=sigma),
        check_chain_rule(seed, sigma=sigma),
        check_proposition1_exact(seed),
    ]
