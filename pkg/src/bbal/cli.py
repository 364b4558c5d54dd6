"""Command-line interface.

Subcommands: ``gen-data``, ``select``, ``run``, ``verify``, ``report``.
Standard output carries machine-parseable results (ids, tables);
diagnostics and the effective-config echo go to standard error. Exit
codes: 0 success, 2 malformed input, 3 infeasible request.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import __version__
from .harness import (
    ExperimentConfig,
    METRIC_NAMES,
    emit_results,
    generate_friedman1,
    load_dataset,
    read_results_csv,
    run_active_learning,
)
from .io import (
    atomic_write_text,
    read_prediction_csv,
    write_dataset_csv,
    write_selection_json,
)
from .kernels import InputError, NoiseModel, KernelState, center_predictions
from .models import EnsembleSpec
from .rng import UniformStream
from .selection import METHODS, SelectionRequest
from .verify import run_all_checks

EXIT_OK, EXIT_BAD_INPUT, EXIT_INFEASIBLE = 0, 2, 3


def _echo(args: dict) -> None:
    print("# config " + json.dumps(args, sort_keys=True), file=sys.stderr)


def _parse_id_list(text: str) -> list[int]:
    if not text.strip():
        return []
    try:
        return [int(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise InputError(f"malformed id list {text!r}") from None


def cmd_gen_data(args) -> int:
    if args.generator != "friedman1":
        print(f"error: unknown generator {args.generator!r}", file=sys.stderr)
        return EXIT_BAD_INPUT
    _echo({"cmd": "gen-data", "generator": args.generator, "n": args.n,
           "noise_sd": args.noise_sd, "seed": args.seed, "out": args.out})
    data = generate_friedman1(args.n, args.noise_sd, args.seed)
    write_dataset_csv(data.features, data.targets, args.out)
    return EXIT_OK


def cmd_select(args) -> int:
    _echo({"cmd": "select", "predictions": args.predictions, "method": args.method,
           "batch_size": args.batch_size, "sigma": args.sigma,
           "train_ids": args.train_ids, "seed": args.seed, "out": args.out})
    try:
        pred = read_prediction_csv(args.predictions)
        train_ids = _parse_id_list(args.train_ids)
        state = KernelState(center_predictions(pred), NoiseModel(args.sigma))
        unknown = set(train_ids) - set(int(i) for i in pred.ids)
        if unknown:
            raise InputError(f"train ids not present in predictions: {sorted(unknown)}")
        pool = np.setdiff1d(pred.ids, np.asarray(train_ids, dtype=np.int64))
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    if args.batch_size > pool.size or pool.size == 0:
        print(
            f"error: batch size {args.batch_size} infeasible for pool of {pool.size}",
            file=sys.stderr,
        )
        return EXIT_INFEASIBLE
    try:
        req = SelectionRequest(
            kernel=state, pool_ids=pool, train_ids=train_ids,
            batch_size=args.batch_size, stream=UniformStream(args.seed),
        )
        result = METHODS[args.method](req)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    if args.out:
        write_selection_json(result.method, result.selected, result.step_scores, args.out)
    for i in result.selected:
        print(i)
    return EXIT_OK


def _config_from_file(path: str) -> tuple[ExperimentConfig, str]:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    ds = raw.get("dataset")
    if not isinstance(ds, dict):
        raise InputError("config needs a 'dataset' section")
    if "path" in ds:
        data = load_dataset(ds["path"])
    elif ds.get("generator") == "friedman1":
        data = generate_friedman1(int(ds["n"]), float(ds.get("noise_sd", 0.0)),
                                  int(ds.get("seed", 0)))
    else:
        raise InputError("dataset section needs 'path' or generator 'friedman1'")
    ens = raw.get("ensemble", {})
    spec = EnsembleSpec(
        kind=ens.get("kind", "random_feature_ridge"),
        member_count=int(ens.get("member_count", 10)),
        n_random_features=int(ens.get("n_random_features", 256)),
        ridge=float(ens.get("ridge", 1e-2)),
        max_depth=int(ens.get("max_depth", 12)),
        min_leaf=int(ens.get("min_leaf", 3)),
        features_per_split=ens.get("features_per_split"),
        bootstrap_only=bool(ens.get("bootstrap_only", False)),
        sigma=float(ens.get("sigma", 0.1)),
    )
    cfg = ExperimentConfig(
        dataset=data,
        initial_train_size=int(raw["initial_train_size"]),
        batch_size=int(raw["batch_size"]),
        rounds=int(raw["rounds"]),
        ensemble=spec,
        methods=tuple(raw.get("methods", ["uniform"])),
        sigma=float(raw.get("sigma", 0.1)),
        trials=int(raw.get("trials", 1)),
        seed=int(raw.get("seed", 0)),
        standardize=bool(raw.get("standardize", True)),
        eval_mode=raw.get("eval_mode", "per_member"),
        timing=bool(raw.get("timing", False)),
        output=raw.get("output"),
    )
    out = raw.get("output", "results.csv")
    return cfg, out


def cmd_run(args) -> int:
    try:
        cfg, out = _config_from_file(args.config)
    except (InputError, KeyError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    _echo({
        "cmd": "run", "config": args.config, "jobs": args.jobs,
        "methods": list(cfg.methods), "trials": cfg.trials, "rounds": cfg.rounds,
        "batch_size": cfg.batch_size, "initial_train_size": cfg.initial_train_size,
        "sigma": cfg.sigma, "seed": cfg.seed, "ensemble_kind": cfg.ensemble.kind,
        "output": out,
    })
    try:
        records = run_active_learning(cfg, jobs=args.jobs)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    emit_results(records, out, timing=cfg.timing)
    print(f"wrote {len(records) * len(METRIC_NAMES)} rows to {out}", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        results = run_all_checks(sigma=args.sigma, seed=args.seed)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    ok = True
    for res in results:
        status = "ok" if res.ok else "FAIL"
        print(f"{res.name:28s} residual={res.residual:.3e} tol={res.tolerance:.0e} {status}")
        ok = ok and res.ok
    return EXIT_OK if ok else 1


def _svg_curves(curves: dict[str, list[float]], path: str) -> None:
    width, height, pad = 640, 400, 50
    all_vals = [v for c in curves.values() for v in c]
    lo, hi = min(all_vals), max(all_vals)
    span = (hi - lo) or 1.0
    max_len = max(len(c) for c in curves.values())
    palette = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
               "#8c564b", "#e377c2"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for ci, (name, vals) in enumerate(sorted(curves.items())):
        pts = []
        for i, v in enumerate(vals):
            x = pad + i * (width - 2 * pad) / max(max_len - 1, 1)
            y = height - pad - (v - lo) * (height - 2 * pad) / span
            pts.append(f"{x:.1f},{y:.1f}")
        color = palette[ci % len(palette)]
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="2" '
            f'points="{" ".join(pts)}"/>'
        )
        parts.append(
            f'<text x="{pad}" y="{pad + 16 * ci}" fill="{color}" '
            f'font-size="13">{name}</text>'
        )
    parts.append("</svg>")
    atomic_write_text(path, "\n".join(parts) + "\n")


def cmd_report(args) -> int:
    try:
        rows = read_results_csv(args.results)
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    if not rows:
        print("no records")
        return EXIT_OK
    methods = sorted({r["method"] for r in rows})
    final_round = max(r["round"] for r in rows)
    print(f"final round {final_round}: mean +/- standard error over trials")
    header = "method".ljust(10) + "".join(name.rjust(22) for name in METRIC_NAMES)
    print(header)
    for method in methods:
        cells = [method.ljust(10)]
        for name in METRIC_NAMES:
            vals = [r["value"] for r in rows
                    if r["method"] == method and r["metric"] == name
                    and r["round"] == final_round]
            mean = float(np.mean(vals))
            se = float(np.std(vals, ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
            cells.append(f"{mean:.4f} +/- {se:.4f}".rjust(22))
        print("".join(cells))
    print()
    print("mean log-RMSE by round")
    rounds = sorted({r["round"] for r in rows})
    print("method".ljust(10) + "".join(f"r{r}".rjust(9) for r in rounds))
    curves = {}
    for method in methods:
        curve = []
        for rnd in rounds:
            vals = [math.log(r["value"]) for r in rows
                    if r["method"] == method and r["metric"] == "RMSE"
                    and r["round"] == rnd]
            curve.append(float(np.mean(vals)))
        curves[method] = curve
        print(method.ljust(10) + "".join(f"{v:9.4f}" for v in curve))
    if args.svg:
        _svg_curves(curves, args.svg)
        print(f"wrote {args.svg}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bbal",
        description="Black-box batch active learning for regression.",
    )
    parser.add_argument("--version", action="version", version=f"bbal {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset CSV")
    p.add_argument("--generator", default="friedman1")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--noise-sd", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("select", help="run batch selection on a prediction CSV")
    p.add_argument("--predictions", required=True)
    p.add_argument("--method", required=True, choices=sorted(METHODS))
    p.add_argument("--batch-size", type=int, required=True)
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--train-ids", default="")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("run", help="run an active-learning experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="run the kernel identity self-checks")
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="summarize a results CSV")
    p.add_argument("--results", required=True)
    p.add_argument("--svg", default="")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
