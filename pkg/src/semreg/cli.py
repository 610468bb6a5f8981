"""Command-line front door: single fits, cross-validation, grids, data generation."""

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys
import time

import numpy as np

from .data import KTooLarge, cross_validate, load_dataset
from .engine import Hyperparameters, fit
from .tree import Dataset, tree_metrics

# Gravitational-law generator settings for `gen-newton`.
NEWTON_G = 6.67392e-11
MASS_RANGE = (1e23, 1e25)
DISTANCE_RANGE = (1e8, 1e12)

# Safety cap applied to CLI fits when no explicit iteration limit is given.
DEFAULT_ITERATION_CAP = 10000

GRID_METRICS = ("mean_train_mse", "mean_test_mse", "median_test_mse", "mean_height", "mean_seconds")


def _parse_limit(text: str) -> int | None:
    if text.lower() in ("unlimited", "none", "inf"):
        return None
    value = int(text)
    return value


def _parse_goal(text: str, targets: np.ndarray) -> float:
    if text.lower() == "mean":
        return float(np.mean(targets))
    return float(text)


def _hyperparameters(args, targets: np.ndarray, strategy=None, min_improvement=None, max_nodes=None):
    max_iterations = _parse_limit(args.max_iterations)
    if max_iterations is None:
        max_iterations = DEFAULT_ITERATION_CAP
    return Hyperparameters(
        strategy=strategy if strategy is not None else args.strategy,
        goal_mse=_parse_goal(args.goal_mse, targets),
        min_improvement=min_improvement if min_improvement is not None else args.min_improvement,
        max_nodes=max_nodes if max_nodes is not None else _parse_limit(args.max_nodes),
        max_iterations=max_iterations,
    )


def _load(args) -> Dataset:
    return load_dataset(
        args.dataset,
        delimiter=args.delimiter,
        header=args.header,
        target_col=args.target_col,
    )


def _write_text(path: str, text: str) -> None:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)


def _write_json(path: str, payload) -> None:
    _write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _fit_payload(report, hp: Hyperparameters) -> dict:
    return {
        "expression": report.expression,
        "mse": report.mse,
        "stop_reason": report.stop_reason.value,
        "iterations": report.iterations,
        "seconds": report.seconds,
        "hyperparameters": {
            "strategy": hp.strategy,
            "goal_mse": hp.goal_mse,
            "min_improvement": hp.min_improvement,
            "max_nodes": hp.max_nodes,
            "max_iterations": hp.max_iterations,
        },
        "trace": [
            {
                "iteration": row.iteration,
                "search": row.search_kind,
                "node": row.node_id,
                "expression": row.expression,
                "mse": row.mse,
            }
            for row in report.trace
        ],
    }


def cmd_fit(args) -> int:
    data = _load(args)
    hp = _hyperparameters(args, data.targets)
    report = fit(data, hp)
    nodes, height = tree_metrics(report.tree)
    print(f"expression: {report.expression}")
    print(f"train_mse: {report.mse!r}")
    print(f"stop_reason: {report.stop_reason.value}")
    print(f"iterations: {report.iterations}")
    print(f"nodes: {nodes} height: {height}")
    print(f"seconds: {report.seconds:.3f}")
    print("trace:")
    for row in report.trace:
        kind = row.search_kind or "init"
        node = "-" if row.node_id is None else row.node_id
        print(f"  {row.iteration}\t{kind}\t{node}\t{row.mse!r}\t{row.expression}")
    if args.out:
        _write_json(f"{args.out}.json", _fit_payload(report, hp))
    return 0


FOLD_COLUMNS = ("row", "train_mse", "test_mse", "expression", "nodes", "height", "seconds")


def _fold_table(cv) -> str:
    lines = [",".join(FOLD_COLUMNS)]
    for f in cv.folds:
        test = "undefined" if f.test_mse is None else repr(f.test_mse)
        expr = '"' + f.expression.replace('"', '""') + '"'
        lines.append(
            f"fold{f.fold},{f.train_mse!r},{test},{expr},{f.nodes},{f.height},{f.seconds:.3f}"
        )
    mean_test = "undefined" if cv.mean_test_mse is None else repr(cv.mean_test_mse)
    std_test = "undefined" if cv.std_test_mse is None else repr(cv.std_test_mse)
    median_test = "undefined" if cv.median_test_mse is None else repr(cv.median_test_mse)
    lines.append(f"mean,{cv.mean_train_mse!r},{mean_test},,,,")
    lines.append(f"std,{cv.std_train_mse!r},{std_test},,,,")
    lines.append(f"median,,{median_test},,,,")
    return "\n".join(lines) + "\n"


def _cv_payload(cv) -> dict:
    return {
        "folds": [
            {
                "fold": f.fold,
                "train_mse": f.train_mse,
                "test_mse": f.test_mse,
                "expression": f.expression,
                "nodes": f.nodes,
                "height": f.height,
                "seconds": f.seconds,
            }
            for f in cv.folds
        ],
        "aggregates": {
            "mean_train_mse": cv.mean_train_mse,
            "std_train_mse": cv.std_train_mse,
            "mean_test_mse": cv.mean_test_mse,
            "std_test_mse": cv.std_test_mse,
            "median_test_mse": cv.median_test_mse,
        },
    }


def cmd_cv(args) -> int:
    data = _load(args)
    hp = _hyperparameters(args, data.targets)
    cv, _ = cross_validate(data, args.k, hp)
    table = _fold_table(cv)
    print(table, end="")
    if args.out:
        _write_text(f"{args.out}_folds.csv", table)
        payload = _cv_payload(cv)
        payload["k"] = args.k
        payload["hyperparameters"] = _fit_payload_hp(hp)
        _write_json(f"{args.out}.json", payload)
    return 0


def _fit_payload_hp(hp: Hyperparameters) -> dict:
    return {
        "strategy": hp.strategy,
        "goal_mse": hp.goal_mse,
        "min_improvement": hp.min_improvement,
        "max_nodes": hp.max_nodes,
        "max_iterations": hp.max_iterations,
    }


def _cell_metrics(cv) -> dict:
    heights = [f.height for f in cv.folds]
    seconds = [f.seconds for f in cv.folds]
    return {
        "mean_train_mse": cv.mean_train_mse,
        "mean_test_mse": cv.mean_test_mse,
        "median_test_mse": cv.median_test_mse,
        "mean_height": float(np.mean(heights)),
        "mean_seconds": float(np.mean(seconds)),
        "std_train_mse": cv.std_train_mse,
        "std_test_mse": cv.std_test_mse,
    }


def cmd_grid(args) -> int:
    data = _load(args)
    strategies = sorted({int(s) for s in args.strategy.split(",")})
    improvements = sorted({float(s) for s in args.min_improvement.split(",")})
    node_limits = sorted({_parse_limit(s) for s in args.max_nodes.split(",")}, key=lambda v: (v is None, v))
    cells = []
    for strategy, improvement, max_nodes in itertools.product(strategies, improvements, node_limits):
        cell = {"strategy": strategy, "min_improvement": improvement, "max_nodes": max_nodes}
        try:
            hp = _hyperparameters(
                args, data.targets, strategy=strategy, min_improvement=improvement, max_nodes=max_nodes
            )
            cv, _ = cross_validate(data, args.k, hp)
            cell["metrics"] = _cell_metrics(cv)
        except Exception as exc:  # record the failure, keep the grid running
            cell["error"] = f"{type(exc).__name__}: {exc}"
        cells.append(cell)

    lines = ["strategy,min_improvement,max_nodes,metric,value"]
    for cell in cells:
        limit = "unlimited" if cell["max_nodes"] is None else cell["max_nodes"]
        prefix = f"{cell['strategy']},{cell['min_improvement']!r},{limit}"
        if "error" in cell:
            for metric in GRID_METRICS:
                lines.append(f"{prefix},{metric},error")
            continue
        for metric in GRID_METRICS:
            value = cell["metrics"][metric]
            text = "undefined" if value is None else repr(value)
            lines.append(f"{prefix},{metric},{text}")
    table = "\n".join(lines) + "\n"
    print(table, end="")

    best_by_train, best_by_test = {}, {}
    for strategy in strategies:
        ok = [c for c in cells if c["strategy"] == strategy and "metrics" in c]
        trainable = [c for c in ok if c["metrics"]["mean_train_mse"] is not None]
        testable = [c for c in ok if c["metrics"]["mean_test_mse"] is not None]
        if trainable:
            best = min(trainable, key=lambda c: c["metrics"]["mean_train_mse"])
            best_by_train[str(strategy)] = _best_cell_summary(best)
        if testable:
            best = min(testable, key=lambda c: c["metrics"]["mean_test_mse"])
            best_by_test[str(strategy)] = _best_cell_summary(best)

    for strategy, summary in best_by_train.items():
        print(
            f"best_train strategy={strategy} min_improvement={summary['min_improvement']!r} "
            f"max_nodes={summary['max_nodes']} train={summary['mean_train_mse']!r} "
            f"test={summary['mean_test_mse']!r}"
        )
    for strategy, summary in best_by_test.items():
        print(
            f"best_test strategy={strategy} min_improvement={summary['min_improvement']!r} "
            f"max_nodes={summary['max_nodes']} test={summary['mean_test_mse']!r} "
            f"train={summary['mean_train_mse']!r}"
        )
    if args.out:
        _write_text(f"{args.out}_grid.csv", table)
        _write_json(
            f"{args.out}.json",
            {"cells": cells, "best_by_train": best_by_train, "best_by_test": best_by_test},
        )
    return 0


def _best_cell_summary(cell) -> dict:
    metrics = cell["metrics"]
    return {
        "min_improvement": cell["min_improvement"],
        "max_nodes": cell["max_nodes"],
        "mean_train_mse": metrics["mean_train_mse"],
        "std_train_mse": metrics["std_train_mse"],
        "mean_test_mse": metrics["mean_test_mse"],
        "std_test_mse": metrics["std_test_mse"],
    }


def generate_newton(n: int, seed: int) -> Dataset:
    """Synthetic gravitation table: masses, distance, and the resulting force."""
    rng = np.random.default_rng(seed)
    x1 = rng.uniform(*MASS_RANGE, n)
    x2 = rng.uniform(*MASS_RANGE, n)
    x3 = rng.uniform(*DISTANCE_RANGE, n)
    targets = NEWTON_G * x1 * x2 / (x3 * x3)
    return Dataset(
        variables=np.vstack([x1, x2, x3]),
        targets=targets,
        variable_names=("x1", "x2", "x3"),
    )


def cmd_gen_newton(args) -> int:
    data = generate_newton(args.n, args.seed)
    lines = ["x1,x2,x3,target"]
    for i in range(data.n_patterns):
        row = [repr(float(data.variables[v, i])) for v in range(3)]
        row.append(repr(float(data.targets[i])))
        lines.append(",".join(row))
    text = "\n".join(lines) + "\n"
    if args.out:
        _write_text(args.out, text)
        print(f"wrote {args.n} patterns to {args.out}")
    else:
        print(text, end="")
    return 0


def _add_dataset_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("dataset", help="delimited numeric text file")
    parser.add_argument("--delimiter", default=",", help="cell delimiter (default ,)")
    parser.add_argument("--header", action="store_true", help="first row holds column names")
    parser.add_argument(
        "--target-col", type=int, default=-1, help="0-based target column (default: last)"
    )


def _add_fit_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--strategy", type=int, default=1, choices=(1, 2, 3, 4))
    parser.add_argument("--min-improvement", type=float, default=1e-6)
    parser.add_argument(
        "--max-nodes", default="unlimited", help="integer or 'unlimited' (default)"
    )
    parser.add_argument(
        "--max-iterations",
        default="unlimited",
        help=f"integer or 'unlimited' (CLI caps unlimited at {DEFAULT_ITERATION_CAP})",
    )
    parser.add_argument(
        "--goal-mse",
        default="0",
        help="stop once train MSE reaches this value; 'mean' uses the target mean",
    )
    parser.add_argument("--out", default=None, help="prefix for report files")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semreg",
        description="Deterministic symbolic regression by greedy semantic-space tree growth",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit one expression to a dataset")
    _add_dataset_arguments(p_fit)
    _add_fit_arguments(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_cv = sub.add_parser("cv", help="k-fold cross-validation")
    _add_dataset_arguments(p_cv)
    _add_fit_arguments(p_cv)
    p_cv.add_argument("--k", type=int, default=10)
    p_cv.set_defaults(func=cmd_cv)

    p_grid = sub.add_parser("grid", help="cross-validated hyperparameter grid")
    _add_dataset_arguments(p_grid)
    p_grid.add_argument("--strategy", default="1,2,3,4", help="comma list of strategies")
    p_grid.add_argument(
        "--min-improvement",
        default="1e-1,1e-2,1e-3,1e-4,1e-5,1e-6,1e-7,1e-8,1e-9,1e-10",
        help="comma list of thresholds",
    )
    p_grid.add_argument(
        "--max-nodes", default="unlimited", help="comma list of node limits or 'unlimited'"
    )
    p_grid.add_argument("--max-iterations", default="unlimited")
    p_grid.add_argument("--goal-mse", default="0")
    p_grid.add_argument("--k", type=int, default=10)
    p_grid.add_argument("--out", default=None)
    p_grid.set_defaults(func=cmd_grid)

    p_gen = sub.add_parser("gen-newton", help="emit the synthetic gravitation dataset")
    p_gen.add_argument("--n", type=int, default=1000)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", default=None, help="CSV path (stdout when omitted)")
    p_gen.set_defaults(func=cmd_gen_newton)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KTooLarge) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
