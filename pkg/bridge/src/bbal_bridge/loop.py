"""Active-learning loop driving the bbal CLI with scikit-learn models.

The loop treats the trained model as a black box: the only numbers that
reach selection are the per-member predictions exported to CSV, and the
only selection logic is whatever ``bbal select`` does with that file.
"""

import os
import subprocess
from dataclasses import dataclass, field

import numpy as np
from sklearn.ensemble import GradientBoostingRegressor, RandomForestRegressor

from .export import member_predictions, write_prediction_csv

MODEL_KINDS = ("forest", "boosted-staged")


class BridgeError(RuntimeError):
    """Configuration or subprocess failure, with captured diagnostics."""


@dataclass
class BridgeConfig:
    dataset_path: str
    model_kind: str
    rounds: int
    batch_size: int
    seed: int
    cli: tuple[str, ...]
    methods: tuple[str, ...] = ("uniform", "lcmd")
    initial_train_size: int = 16
    member_count: int = 100
    sigma: float = 0.1
    output: str = "bridge_results.csv"
    workdir: str = "."

    def __post_init__(self):
        if self.model_kind not in MODEL_KINDS:
            raise BridgeError(f"model_kind must be one of {MODEL_KINDS}")
        if self.rounds < 0 or self.batch_size < 1 or self.initial_train_size < 1:
            raise BridgeError("rounds >= 0, batch_size >= 1, initial size >= 1")
        if isinstance(self.cli, str):
            self.cli = (self.cli,)
        else:
            self.cli = tuple(self.cli)
        if not os.path.exists(self.dataset_path):
            raise BridgeError(f"dataset not found: {self.dataset_path}")
        probe = subprocess.run(
            list(self.cli) + ["--version"], capture_output=True, text=True
        )
        if probe.returncode != 0 or not probe.stdout.strip():
            raise BridgeError(
                f"CLI {self.cli} does not respond to --version: {probe.stderr.strip()}"
            )


def load_dataset(path: str):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if header[-1] != "target" or not all(
        h == f"f{i}" for i, h in enumerate(header[:-1])
    ):
        raise BridgeError(f"{path}: expected header f0,...,f{{d-1}},target")
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return table[:, :-1], table[:, -1]


def run_select(cli, predictions_path, method, batch_size, sigma, train_ids, seed):
    """Invoke ``bbal select`` and return the chosen ids from stdout."""
    cmd = list(cli) + [
        "select",
        "--predictions", predictions_path,
        "--method", method,
        "--batch-size", str(batch_size),
        "--sigma", str(sigma),
        "--train-ids", ",".join(str(int(i)) for i in train_ids),
        "--seed", str(seed),
    ]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        raise BridgeError(
            f"select exited {proc.returncode}: {proc.stderr.strip()}"
        )
    return [int(tok) for tok in proc.stdout.split()]


def _fit_model(cfg: BridgeConfig, x, y, fit_seed: int):
    if cfg.model_kind == "forest":
        model = RandomForestRegressor(
            n_estimators=cfg.member_count, random_state=fit_seed
        )
    else:
        model = GradientBoostingRegressor(random_state=fit_seed)
    return model.fit(x, y)


def _select_with_retry(cfg, values, ids, train_ids, method, pred_path, seed):
    """Run selection, halving the exported ensemble on failure.

    A failed invocation (for instance a numerically degenerate kernel) is
    retried with half as many member columns until fewer than two remain,
    at which point the last diagnostics are propagated.
    """
    cols = values
    while True:
        write_prediction_csv(ids, cols, pred_path)
        try:
            return run_select(
                cfg.cli, pred_path, method, cfg.batch_size, cfg.sigma,
                train_ids, seed,
            )
        except BridgeError:
            if cols.shape[1] < 4:
                raise
            cols = cols[:, : cols.shape[1] // 2]


@dataclass
class BridgeResult:
    records: list = field(default_factory=list)
    acquisitions: dict = field(default_factory=dict)
    output: str = ""


def bridge_al_loop(cfg: BridgeConfig) -> BridgeResult:
    features, targets = load_dataset(cfg.dataset_path)
    n = features.shape[0]
    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(n)
    n_test = max(int(round(0.2 * n)), 1)
    test_ids = np.sort(order[:n_test])
    avail = np.sort(order[n_test:])
    init = list(np.sort(rng.choice(avail, size=cfg.initial_train_size, replace=False)))
    if cfg.initial_train_size + cfg.batch_size * cfg.rounds > avail.size:
        raise BridgeError("schedule exceeds the available pool")

    result = BridgeResult(output=os.path.join(cfg.workdir, cfg.output))
    pred_path = os.path.join(cfg.workdir, "bridge_predictions.csv")
    for method in cfg.methods:
        train = list(init)
        for rnd in range(cfg.rounds + 1):
            model = _fit_model(cfg, features[train], targets[train], cfg.seed)
            values = member_predictions(model, features)
            # Per-member RMSE pooled over members, the same evaluation mode
            # the harness defaults to; it charges ensembles for disagreement.
            err = values[test_ids] - targets[test_ids, None]
            rmse = float(np.sqrt(np.mean(err**2)))
            result.records.append(
                {"method": method, "trial": 0, "round": rnd,
                 "n_train": len(train), "metric": "RMSE", "value": rmse}
            )
            if rnd == cfg.rounds:
                break
            # Train rows stay in the export: selection conditions on them.
            picked = _select_with_retry(
                cfg, values[avail], avail, train, method, pred_path,
                seed=cfg.seed * 1000 + rnd,
            )
            result.acquisitions[(method, rnd)] = list(picked)
            train = sorted(train + picked)

    lines = ["method,trial,round,n_train,metric,value,seconds"]
    for r in sorted(result.records, key=lambda r: (r["method"], r["trial"], r["round"])):
        lines.append(
            f"{r['method']},{r['trial']},{r['round']},{r['n_train']},"
            f"{r['metric']},{format(r['value'], '.17g')},"
        )
    with open(result.output, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return result
