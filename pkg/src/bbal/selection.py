"""Batch acquisition algorithms on top of a posterior kernel state.

Every method takes a :class:`SelectionRequest` and returns a
:class:`SelectionResult` with the acquired ids in order plus per-step
scores. Shared conventions:

* candidates are processed in ascending id order, so score ties (exact
  float equality) always resolve to the lowest id;
* all methods score under the kernel conditioned on ``train_ids``;
* stochastic methods consume uniforms from ``req.stream`` in a documented
  order, so identical requests give identical results.

Greedy methods that re-condition per step work on a dense posterior Gram
over the pool with rank-1 updates; this is algebraically identical to
repeated feature-space conditioning (the Woodbury identity the test suite
checks) and avoids refactorizing per step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .kernels import InputError, KernelState

__all__ = [
    "SelectionRequest",
    "SelectionResult",
    "select_uniform",
    "select_bald_topk",
    "select_maxdet_batchbald",
    "select_badge_kmeanspp",
    "select_coreset_maxdist",
    "select_lcmd",
    "select_bait_forward",
    "METHODS",
]

BAIT_SUBSAMPLE_LIMIT = 2000


@dataclass
class SelectionRequest:
    kernel: KernelState
    pool_ids: Sequence[int]
    train_ids: Sequence[int] = ()
    batch_size: int = 1
    stream: object = None  # draw() -> uniform [0,1); only stochastic methods use it

    def __post_init__(self):
        pool = np.unique(np.asarray(list(self.pool_ids), dtype=np.int64))
        train = np.unique(np.asarray(list(self.train_ids), dtype=np.int64))
        if pool.size == 0:
            raise InputError("pool_ids must be non-empty")
        if np.intersect1d(pool, train).size:
            raise InputError("pool_ids and train_ids must be disjoint")
        if not (1 <= self.batch_size <= pool.size):
            raise InputError(
                f"batch size {self.batch_size} infeasible for pool of {pool.size}"
            )
        self.pool_ids = pool  # ascending
        self.train_ids = train


@dataclass
class SelectionResult:
    method: str
    selected: list[int]
    step_scores: list[float]


class _PoolGram:
    """Posterior Gram over the sorted pool, with rank-1 conditioning updates."""

    def __init__(self, state: KernelState, pool: np.ndarray):
        self.pool = pool
        self.gram = state.gram(pool)
        self.sigma2 = state.noise.variance

    def variances(self) -> np.ndarray:
        return np.diag(self.gram).copy()

    def condition(self, pos: int) -> None:
        col = self.gram[:, pos].copy()
        denom = col[pos] + self.sigma2
        self.gram -= np.outer(col, col) / denom


def _train_conditioned(req: SelectionRequest) -> KernelState:
    return req.kernel.condition_on_all(req.train_ids)


def _floor_index(u: float, n: int) -> int:
    return min(int(math.floor(u * n)), n - 1)


# -- methods -------------------------------------------------------------------


def select_uniform(req: SelectionRequest) -> SelectionResult:
    """Without-replacement uniform draws via floor(u * remaining)."""
    remaining = list(req.pool_ids)
    selected, scores = [], []
    for _ in range(req.batch_size):
        u = req.stream.draw()
        idx = _floor_index(u, len(remaining))
        selected.append(int(remaining.pop(idx)))
        scores.append(u)
    return SelectionResult("uniform", selected, scores)


def select_bald_topk(req: SelectionRequest) -> SelectionResult:
    """Top-B marginal expected information gain, ignoring batch redundancy."""
    state = _train_conditioned(req)
    var = state.marginal_variances(req.pool_ids)
    scores = 0.5 * np.log1p(var / state.noise.variance)
    # Stable sort over ascending ids => ties resolve to lowest id.
    order = np.argsort(-scores, kind="stable")[: req.batch_size]
    return SelectionResult(
        "bald",
        [int(req.pool_ids[i]) for i in order],
        [float(scores[i]) for i in order],
    )


def select_maxdet_batchbald(req: SelectionRequest) -> SelectionResult:
    """Greedy determinant maximization: pick argmax posterior variance, condition, repeat.

    step_scores are the incremental mutual-information gains; they sum to
    the batch mutual information of the selected set.
    """
    state = _train_conditioned(req)
    pg = _PoolGram(state, req.pool_ids)
    active = np.ones(len(req.pool_ids), dtype=bool)
    selected, scores = [], []
    for _ in range(req.batch_size):
        var = np.diag(pg.gram).copy()
        var[~active] = -np.inf
        pos = int(np.argmax(var))
        selected.append(int(req.pool_ids[pos]))
        scores.append(0.5 * math.log1p(max(var[pos], 0.0) / pg.sigma2))
        pg.condition(pos)
        active[pos] = False
    return SelectionResult("maxdet", selected, scores)


def select_badge_kmeanspp(req: SelectionRequest) -> SelectionResult:
    """Kernel-space k-means++ seeding on the train-conditioned kernel.

    First center drawn with probability proportional to k(x, x); later
    centers proportional to squared distance to the nearest chosen center.
    Zero total mass falls back to a uniform draw over the remaining pool.
    """
    state = _train_conditioned(req)
    feats = state.posterior_features(req.pool_ids)
    n = len(req.pool_ids)
    active = np.ones(n, dtype=bool)
    mass = np.einsum("ij,ij->i", feats, feats)  # k(x, x)
    d2 = None
    selected, scores = [], []
    for _ in range(req.batch_size):
        cur = mass if d2 is None else d2
        weights = np.where(active, np.maximum(cur, 0.0), 0.0)
        total = float(weights.sum())
        u = req.stream.draw()
        if total <= 0.0:
            live = np.flatnonzero(active)
            pos = int(live[_floor_index(u, len(live))])
        else:
            cum = np.cumsum(weights)
            pos = int(np.searchsorted(cum, u * total, side="right"))
            pos = min(pos, n - 1)
            while not active[pos] or weights[pos] == 0.0:
                pos += 1  # boundary landed on zero-mass entry; step to next live one
        selected.append(int(req.pool_ids[pos]))
        scores.append(float(weights[pos]))
        active[pos] = False
        dist = np.einsum("ij,ij->i", feats - feats[pos], feats - feats[pos])
        d2 = dist if d2 is None else np.minimum(d2, dist)
    return SelectionResult("badge", selected, scores)


def select_coreset_maxdist(req: SelectionRequest) -> SelectionResult:
    """Farthest-first traversal in the kernel metric d(x, y) = ||phi_x - phi_y||.

    Centers start from the training set; with no training data the first
    pick is the point of largest marginal variance (distance to the zero
    function), which stays in the center set so step scores never increase.
    """
    state = _train_conditioned(req)
    feats = state.posterior_features(req.pool_ids)
    n = len(req.pool_ids)
    if len(req.train_ids):
        centers = state.posterior_features(req.train_ids)
        sq = (
            np.einsum("ij,ij->i", feats, feats)[:, None]
            - 2.0 * feats @ centers.T
            + np.einsum("ij,ij->i", centers, centers)[None, :]
        )
        mind = np.sqrt(np.maximum(sq.min(axis=1), 0.0))
    else:
        mind = np.sqrt(np.maximum(np.einsum("ij,ij->i", feats, feats), 0.0))
    active = np.ones(n, dtype=bool)
    selected, scores = [], []
    for _ in range(req.batch_size):
        cand = np.where(active, mind, -np.inf)
        pos = int(np.argmax(cand))
        selected.append(int(req.pool_ids[pos]))
        scores.append(float(mind[pos]))
        active[pos] = False
        diff = feats - feats[pos]
        mind = np.minimum(mind, np.sqrt(np.maximum(np.einsum("ij,ij->i", diff, diff), 0.0)))
    return SelectionResult("coreset", selected, scores)


def select_lcmd(req: SelectionRequest) -> SelectionResult:
    """Largest-cluster maximum distance.

    Assign every unselected pool point to its nearest center (training
    points plus picks so far); the cluster with the largest total squared
    distance yields the next pick: its farthest member.
    """
    state = _train_conditioned(req)
    feats = state.posterior_features(req.pool_ids)
    n = len(req.pool_ids)
    centers_feats: list[np.ndarray] = []
    center_ids: list[int] = []
    for tid in req.train_ids:  # already ascending
        centers_feats.append(state.posterior_features([tid])[0])
        center_ids.append(int(tid))
    active = np.ones(n, dtype=bool)
    selected, scores = [], []
    for _ in range(req.batch_size):
        live = np.flatnonzero(active)
        if not centers_feats:
            # No centers yet: bootstrap with the largest marginal variance.
            var = np.einsum("ij,ij->i", feats[live], feats[live])
            j = int(np.argmax(var))
            pos = int(live[j])
            score = float(var[j])
        else:
            c = np.asarray(centers_feats)
            sq = (
                np.einsum("ij,ij->i", feats[live], feats[live])[:, None]
                - 2.0 * feats[live] @ c.T
                + np.einsum("ij,ij->i", c, c)[None, :]
            )
            sq = np.maximum(sq, 0.0)
            assign = np.argmin(sq, axis=1)
            d2 = sq[np.arange(len(live)), assign]
            weights = np.bincount(assign, weights=d2, minlength=len(centers_feats))
            if weights.max() <= 0.0:
                pos = int(live[0])  # all points coincide with centers
                score = 0.0
            else:
                best = np.flatnonzero(weights == weights.max())
                cluster = int(best[np.argmin([center_ids[b] for b in best])])
                members = np.flatnonzero(assign == cluster)
                j = int(members[np.argmax(d2[members])])
                pos = int(live[j])
                score = float(d2[j])
        selected.append(int(req.pool_ids[pos]))
        scores.append(score)
        centers_feats.append(feats[pos])
        center_ids.append(int(req.pool_ids[pos]))
        active[pos] = False
    return SelectionResult("lcmd", selected, scores)


def select_bait_forward(req: SelectionRequest, backward: bool = False) -> SelectionResult:
    """Greedy minimization of total pool posterior variance.

    Each step conditions on the candidate that minimizes the summed
    marginal variance over the (possibly subsampled) pool. The optional
    backward pass over-selects by ceil(B/2) and then prunes back,
    refitting from scratch on the retained set.
    """
    if backward:
        return _bait_with_backward(req)
    order, scores = _bait_forward_order(req, req.batch_size)
    return SelectionResult("bait", order, scores)


def _bait_objective_positions(req: SelectionRequest) -> np.ndarray:
    n = len(req.pool_ids)
    if n <= BAIT_SUBSAMPLE_LIMIT:
        return np.arange(n)
    # Seeded without-replacement subsample over ascending positions.
    remaining = list(range(n))
    picked = []
    for _ in range(BAIT_SUBSAMPLE_LIMIT):
        u = req.stream.draw()
        picked.append(remaining.pop(_floor_index(u, len(remaining))))
    return np.sort(np.asarray(picked))


def _bait_forward_order(req: SelectionRequest, count: int):
    state = _train_conditioned(req)
    pg = _PoolGram(state, req.pool_ids)
    obj = _bait_objective_positions(req)
    n = len(req.pool_ids)
    active = np.ones(n, dtype=bool)
    selected, scores = [], []
    for _ in range(count):
        g = pg.gram
        diag = np.diag(g)
        total = float(diag[obj].sum())
        # After conditioning on x: total' = total - sum_y k(x,y)^2 / (k(x,x)+s2).
        reduction = np.einsum("ij,ij->i", g[:, obj], g[:, obj]) / (diag + pg.sigma2)
        cand = np.where(active, total - reduction, np.inf)
        pos = int(np.argmin(cand))
        selected.append(int(req.pool_ids[pos]))
        scores.append(float(cand[pos]))
        pg.condition(pos)
        active[pos] = False
    return selected, scores


def _bait_with_backward(req: SelectionRequest) -> SelectionResult:
    b = req.batch_size
    over = min(b + math.ceil(b / 2), len(req.pool_ids))
    order, _ = _bait_forward_order(req, over)
    retained = list(order)
    state = _train_conditioned(req)
    while len(retained) > b:
        best_total, best_idx = None, None
        for idx in range(len(retained)):
            kept = retained[:idx] + retained[idx + 1 :]
            st = state.condition_on_all(kept)
            total = float(st.marginal_variances(req.pool_ids).sum())
            if best_total is None or total < best_total:
                best_total, best_idx = total, idx
        retained.pop(best_idx)
    # Rebuild step scores by sequential conditioning over the retained set.
    scores = []
    st = state
    for pid in retained:
        st = st.condition_on(pid)
        scores.append(float(st.marginal_variances(req.pool_ids).sum()))
    return SelectionResult("bait", [int(i) for i in retained], scores)


METHODS: dict[str, Callable[[SelectionRequest], SelectionResult]] = {
    "uniform": select_uniform,
    "bald": select_bald_topk,
    "maxdet": select_maxdet_batchbald,
    "badge": select_badge_kmeanspp,
    "coreset": select_coreset_maxdist,
    "lcmd": select_lcmd,
    "bait": select_bait_forward,
}
