"""File formats: prediction CSV, dataset CSV, selection JSON, results CSV.

All numeric values are written with round-trip decimal formatting (17
significant digits) so re-reading reproduces the exact float64 bits.
Writes are atomic: content goes to a temp file in the target directory
and is renamed into place, so readers never observe partial files.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from typing import Sequence

import numpy as np

from .kernels import InputError, PredictionMatrix


def fmt(x: float) -> str:
    """Round-trip decimal formatting for float64."""
    return format(float(x), ".17g")


def atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- prediction matrix CSV (the black-box contract) --------------------------


def write_prediction_csv(pred: PredictionMatrix, path: str) -> None:
    k = pred.member_count
    lines = ["id," + ",".join(f"m{j}" for j in range(k))]
    for i, row in zip(pred.ids, pred.values):
        lines.append(str(int(i)) + "," + ",".join(fmt(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_prediction_csv(path: str) -> PredictionMatrix:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        if len(header) < 3 or header[0] != "id":
            raise InputError(f"{path}:1: expected header id,m0,m1,...")
        expected = ["id"] + [f"m{j}" for j in range(len(header) - 1)]
        if header != expected:
            raise InputError(f"{path}:1: malformed header {header!r}")
        ids, rows = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise InputError(f"{path}:{lineno}: wrong field count")
            try:
                ids.append(int(rec[0]))
                rows.append([float(v) for v in rec[1:]])
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise InputError(f"{path}: no data rows")
    try:
        return PredictionMatrix(np.array(ids), np.array(rows))
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None


# -- dataset CSV --------------------------------------------------------------


def write_dataset_csv(features: np.ndarray, targets: np.ndarray, path: str) -> None:
    d = features.shape[1]
    lines = [",".join(f"f{j}" for j in range(d)) + ",target"]
    for row, y in zip(features, targets):
        lines.append(",".join(fmt(v) for v in row) + "," + fmt(y))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_dataset_csv(path: str):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        if len(header) < 2 or header[-1] != "target":
            raise InputError(f"{path}:1: expected header f0,...,target")
        d = len(header) - 1
        if header[:-1] != [f"f{j}" for j in range(d)]:
            raise InputError(f"{path}:1: malformed header {header!r}")
        feats, targets = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != d + 1:
                raise InputError(f"{path}:{lineno}: wrong field count")
            try:
                vals = [float(v) for v in rec]
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
            if not all(np.isfinite(vals)):
                raise InputError(f"{path}:{lineno}: non-finite value")
            feats.append(vals[:-1])
            targets.append(vals[-1])
    if not feats:
        raise InputError(f"{path}: no data rows")
    return np.array(feats), np.array(targets)


# -- selection result JSON -----------------------------------------------------


def write_selection_json(method: str, selected: Sequence[int],
                         step_scores: Sequence[float], path: str) -> None:
    obj = {
        "method": method,
        "selected": [int(i) for i in selected],
        "step_scores": [float(s) for s in step_scores],
    }
    atomic_write_text(path, json.dumps(obj, indent=2) + "\n")


def read_selection_json(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
