"""Per-member prediction export for scikit-learn ensembles.

Writes the prediction CSV contract consumed by the ``bbal select`` command:
a header ``id,m0,...,m{K-1}`` followed by one row per instance, values in
round-trip ("%.17g") formatting, written atomically.
"""

import math
import os
import tempfile

import numpy as np


class UnsupportedModelError(ValueError):
    """Raised for models that expose no per-member predictions."""


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def member_predictions(model, x: np.ndarray) -> np.ndarray:
    """N x K matrix of per-member predictions for a fitted sklearn model.

    Forests contribute one column per tree. Boosted models contribute staged
    cumulative predictions at evenly spaced stages, at most 20 of them, so a
    single model acts as a virtual ensemble of prefix models.
    """
    x = np.asarray(x, dtype=np.float64)
    staged = getattr(model, "staged_predict", None)
    estimators = getattr(model, "estimators_", None)
    if estimators is not None and np.ndim(estimators) == 1:
        cols = [est.predict(x) for est in estimators]
    elif callable(staged):
        stages = list(staged(x))
        stride = math.ceil(len(stages) / 20)
        cols = stages[stride - 1 :: stride]
    else:
        raise UnsupportedModelError(
            f"{type(model).__name__} exposes neither per-tree estimators_ "
            "nor staged_predict; per-member predictions are unavailable"
        )
    values = np.column_stack(cols)
    if values.shape[1] < 2:
        raise UnsupportedModelError(
            f"only {values.shape[1]} member column(s); the prediction CSV "
            "contract requires K >= 2"
        )
    return values


def write_prediction_csv(ids, values: np.ndarray, out_path: str) -> None:
    values = np.asarray(values, dtype=np.float64)
    header = "id," + ",".join(f"m{k}" for k in range(values.shape[1]))
    lines = [header]
    for i, row in zip(ids, values):
        lines.append(str(int(i)) + "," + ",".join(_fmt(v) for v in row))
    _atomic_write_text(out_path, "\n".join(lines) + "\n")


def export_member_predictions(model, x: np.ndarray, out_path: str,
                              ids=None) -> str:
    """Export per-member predictions of a fitted model to the CSV contract."""
    values = member_predictions(model, x)
    if ids is None:
        ids = np.arange(values.shape[0])
    write_prediction_csv(ids, values, out_path)
    return out_path
