"""Pool-based active-learning experiment loop and metrics.

A run iterates per (method, trial): split pool/test, draw an initial
training set, then repeat {fit ensemble, predict, build kernel, select a
batch, acquire} for the configured number of rounds, recording error
metrics on the held-out test set each round (including a round-0 anchor
before any acquisition).

Seeding layout (all derived from the master seed with :func:`mix64`):

* trial seed           = mix64(master, trial)
* pool/test split      = mix64(trial_seed, TAG_SPLIT)     (method-independent)
* initial train draw   = mix64(trial_seed, TAG_INIT)      (method-independent)
* ensemble fit round r = mix64(trial_seed, TAG_FIT, r)    (method-independent)
* selection round r    = mix64(trial_seed, TAG_SELECT, method_index, r)

The method-independent parts guarantee that methods are compared on the
same splits and that a degenerate run acquiring the whole pool yields
identical final metrics for every method.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .io import read_dataset_csv
from .kernels import InputError, NoiseModel, KernelState, center_predictions
from .models import Dataset, EnsembleSpec, fit_ensemble
from .rng import UniformStream, mix64
from .selection import METHODS, SelectionRequest

__all__ = [
    "ExperimentConfig",
    "RoundRecord",
    "generate_friedman1",
    "compute_metrics",
    "run_active_learning",
    "emit_results",
]

METRIC_NAMES = ("MAE", "RMSE", "q95", "q99", "MAXE")

TAG_SPLIT, TAG_INIT, TAG_FIT, TAG_SELECT = 0x51, 0x52, 0x53, 0x54


def friedman1_mean(x: np.ndarray) -> np.ndarray:
    """Noise-free Friedman #1 target; features 5..9 are pure noise."""
    x = np.atleast_2d(x)
    return (
        10.0 * np.sin(math.pi * x[:, 0] * x[:, 1])
        + 20.0 * (x[:, 2] - 0.5) ** 2
        + 10.0 * x[:, 3]
        + 5.0 * x[:, 4]
    )


def generate_friedman1(n: int, noise_sd: float, seed: int) -> Dataset:
    """Friedman #1 benchmark: 10 uniform features, 5 informative."""
    if n < 1:
        raise InputError("n must be >= 1")
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 1.0, (n, 10))
    y = friedman1_mean(x)
    if noise_sd > 0:
        y = y + rng.normal(0.0, noise_sd, n)
    return Dataset(x, y, name="friedman1")


def load_dataset(path: str, name: str | None = None) -> Dataset:
    features, targets = read_dataset_csv(path)
    return Dataset(features, targets, name=name or path)


def _nearest_rank(sorted_vals: np.ndarray, p: float) -> float:
    n = sorted_vals.size
    rank = min(max(int(math.ceil(p * n)), 1), n)
    return float(sorted_vals[rank - 1])


def _metrics_from_errors(err: np.ndarray) -> dict[str, float]:
    a = np.sort(np.abs(err))
    return {
        "MAE": float(a.mean()),
        "RMSE": float(np.sqrt(np.mean(a * a))),
        "q95": _nearest_rank(a, 0.95),
        "q99": _nearest_rank(a, 0.99),
        "MAXE": float(a[-1]),
    }


def compute_metrics(predictions: np.ndarray, targets: np.ndarray,
                    mode: str = "per_member") -> dict[str, float]:
    """Error metrics of predictions against targets.

    2-D input is one column per ensemble member. ``per_member`` evaluates
    each member separately and averages the metrics across members;
    ``ensemble_mean`` evaluates the member-mean prediction. Quantiles use
    the nearest-rank definition.
    """
    predictions = np.asarray(predictions, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if predictions.ndim == 1:
        return _metrics_from_errors(predictions - targets)
    if mode == "ensemble_mean":
        return _metrics_from_errors(predictions.mean(axis=1) - targets)
    if mode != "per_member":
        raise InputError(f"unknown evaluation mode {mode!r}")
    per = [
        _metrics_from_errors(predictions[:, k] - targets)
        for k in range(predictions.shape[1])
    ]
    return {name: float(np.mean([m[name] for m in per])) for name in METRIC_NAMES}


@dataclass
class RoundRecord:
    method: str
    trial: int
    round_index: int
    n_train: int
    metrics: dict[str, float]
    seconds: float = 0.0

    def __post_init__(self):
        m = self.metrics
        if not (m["RMSE"] >= m["MAE"] >= 0.0):
            raise InputError("metric ordering violated: RMSE >= MAE >= 0")
        if not (m["MAXE"] >= m["q99"] >= m["q95"] >= 0.0):
            raise InputError("metric ordering violated: MAXE >= q99 >= q95 >= 0")


@dataclass
class ExperimentConfig:
    dataset: Dataset
    initial_train_size: int
    batch_size: int
    rounds: int
    ensemble: EnsembleSpec
    methods: tuple[str, ...]
    sigma: float = 0.1
    trials: int = 1
    seed: int = 0
    standardize: bool = True
    eval_mode: str = "per_member"
    timing: bool = False
    output: str | None = None

    def __post_init__(self):
        if self.initial_train_size < 1:
            raise InputError("initial_train_size must be >= 1")
        if self.batch_size < 1 or self.rounds < 0 or self.trials < 1:
            raise InputError("batch_size >= 1, rounds >= 0, trials >= 1 required")
        methods = list(dict.fromkeys(self.methods))
        if "uniform" not in methods:
            methods.insert(0, "uniform")  # baseline always included
        for m in methods:
            if m not in METHODS:
                raise InputError(f"unknown selection method {m!r}")
        self.methods = tuple(methods)
        pool_size = self.dataset.n_points - _test_count(self.dataset.n_points)
        if self.batch_size * self.rounds + self.initial_train_size > pool_size:
            raise InputError(
                f"schedule needs {self.batch_size * self.rounds + self.initial_train_size} "
                f"pool points but only {pool_size} available"
            )
        NoiseModel(self.sigma)  # validates sigma


def _test_count(n: int) -> int:
    return max(int(round(0.2 * n)), 1) if n > 1 else 0


def _standardizer(x: np.ndarray, y: np.ndarray):
    mx, sx = x.mean(axis=0), x.std(axis=0)
    my, sy = float(y.mean()), float(y.std())
    sx = np.where(sx > 0, sx, 1.0)
    sy = sy if sy > 0 else 1.0
    return mx, sx, my, sy


def run_unit(cfg: ExperimentConfig, method: str, method_index: int,
             trial: int, trace: list | None = None) -> list[RoundRecord]:
    """One (method, trial) execution; pure function of its arguments.

    When ``trace`` is given, the per-round acquired id lists are appended
    to it (used by replay consistency checks).
    """
    data = cfg.dataset
    trial_seed = mix64(cfg.seed, trial)
    split_rng = np.random.default_rng(mix64(trial_seed, TAG_SPLIT))
    perm = split_rng.permutation(data.n_points)
    n_test = _test_count(data.n_points)
    test_ids = np.sort(perm[:n_test])
    pool_ids = np.sort(perm[n_test:])

    init_rng = np.random.default_rng(mix64(trial_seed, TAG_INIT))
    train = list(np.sort(init_rng.choice(pool_ids, cfg.initial_train_size, replace=False)))

    records = []
    try:
        for rnd in range(cfg.rounds + 1):
            t0 = time.perf_counter()
            # Standardization statistics are refreshed on the current
            # training set each round; targets are de-standardized before
            # metrics are computed.
            if cfg.standardize:
                mx, sx, my, sy = _standardizer(data.features[train], data.targets[train])
            else:
                mx, sx, my, sy = 0.0, 1.0, 0.0, 1.0
            std_data = Dataset((data.features - mx) / sx, (data.targets - my) / sy)
            spec = _with_seed(cfg.ensemble, mix64(trial_seed, TAG_FIT, rnd))
            ensemble = fit_ensemble(std_data, train, spec)
            test_pred = ensemble.predict_members(std_data.features[test_ids]).values
            metrics = compute_metrics(test_pred * sy + my, data.targets[test_ids],
                                      cfg.eval_mode)
            records.append(RoundRecord(
                method=method, trial=trial, round_index=rnd, n_train=len(train),
                metrics=metrics, seconds=time.perf_counter() - t0,
            ))
            if rnd < cfg.rounds:
                # Kernel over pool predictions only; selection never sees
                # test features.
                pred = ensemble.predict_members(std_data.features[pool_ids],
                                                ids=pool_ids)
                state = KernelState(center_predictions(pred), NoiseModel(cfg.sigma))
                candidates = np.setdiff1d(pool_ids, np.asarray(train, dtype=np.int64))
                if candidates.size < cfg.batch_size:
                    raise InputError(
                        f"label exhaustion: {candidates.size} candidates left "
                        f"for batch of {cfg.batch_size}"
                    )
                req = SelectionRequest(
                    kernel=state,
                    pool_ids=candidates,
                    train_ids=list(train),
                    batch_size=cfg.batch_size,
                    stream=UniformStream(
                        mix64(trial_seed, TAG_SELECT, method_index, rnd + 1)
                    ),
                )
                selected = METHODS[method](req).selected
                assert not set(selected) & set(train)
                if trace is not None:
                    trace.append(list(selected))
                train.extend(selected)
                train.sort()  # canonical order: fits depend only on the set
    except InputError as exc:
        raise InputError(f"method={method} trial={trial}: {exc}") from exc
    return records


def _with_seed(spec: EnsembleSpec, seed: int) -> EnsembleSpec:
    from dataclasses import replace
    return replace(spec, seed=seed)


def run_active_learning(cfg: ExperimentConfig, jobs: int = 1) -> list[RoundRecord]:
    """Execute every (method, trial) unit; output order is deterministic."""
    units = [
        (method, mi, trial)
        for mi, method in enumerate(cfg.methods)
        for trial in range(cfg.trials)
    ]
    records: list[RoundRecord] = []
    if jobs <= 1:
        for method, mi, trial in units:
            records.extend(run_unit(cfg, method, mi, trial))
    else:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(run_unit, cfg, m, mi, t) for m, mi, t in units]
            for fut in futures:
                records.extend(fut.result())
    records.sort(key=lambda r: (r.method, r.trial, r.round_index))
    return records


def emit_results(records: Sequence[RoundRecord], path: str, timing: bool = False) -> None:
    """Long-format results CSV, one row per (record, metric).

    The seconds field is emitted only when timing is enabled; by default it
    is left empty so repeated runs produce byte-identical files.
    """
    from .io import atomic_write_text, fmt

    rows = []
    for rec in records:
        for name in METRIC_NAMES:
            rows.append((
                rec.method, rec.trial, rec.round_index, rec.n_train,
                name, rec.metrics[name],
                format(rec.seconds, ".6f") if timing else "",
            ))
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[4]))
    lines = ["method,trial,round,n_train,metric,value,seconds"]
    for method, trial, rnd, n_train, name, value, secs in rows:
        lines.append(f"{method},{trial},{rnd},{n_train},{name},{fmt(value)},{secs}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_results_csv(path: str) -> list[dict]:
    import csv

    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["method", "trial", "round", "n_train",
                                 "metric", "value", "seconds"]:
            raise InputError(f"{path}: malformed results header")
        out = []
        for rec in reader:
            out.append({
                "method": rec["method"],
                "trial": int(rec["trial"]),
                "round": int(rec["round"]),
                "n_train": int(rec["n_train"]),
                "metric": rec["metric"],
                "value": float(rec["value"]),
            })
        return out
