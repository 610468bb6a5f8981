"""Dataset ingestion, deterministic k-fold splitting, and fold evaluation."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np

from .engine import FitReport, Hyperparameters, fit
from .tree import (
    Dataset,
    DivisionByZero,
    Node,
    NonFiniteResult,
    evaluate_semantics,
    format_expression,
    tree_metrics,
)


class DatasetParseError(ValueError):
    def __init__(self, message: str, row: int, column: int):
        super().__init__(f"{message} (row {row}, column {column})")
        self.row = row
        self.column = column


class EmptyDataset(ValueError):
    pass


class KTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class FoldSplit:
    """Pattern-to-fold assignment; a pure function of (N, k), never shuffled."""

    k: int
    assignments: np.ndarray


@dataclass(frozen=True)
class FoldResult:
    fold: int
    train_mse: float
    test_mse: float | None
    expression: str
    nodes: int
    height: int
    seconds: float


@dataclass(frozen=True)
class CvResult:
    folds: tuple[FoldResult, ...]
    mean_train_mse: float
    std_train_mse: float
    mean_test_mse: float | None
    std_test_mse: float | None
    median_test_mse: float | None


def load_dataset(
    path,
    delimiter: str = ",",
    header: bool = False,
    target_col: int = -1,
) -> Dataset:
    """Read a delimited numeric text file into variables (L x N) and targets."""
    with open(path, "r", encoding="utf-8", newline="") as handle:
        rows = [row for row in csv.reader(handle, delimiter=delimiter) if row]
    names = None
    if header:
        if not rows:
            raise EmptyDataset(str(path))
        names = [cell.strip() for cell in rows[0]]
        rows = rows[1:]
    if not rows:
        raise EmptyDataset(str(path))
    width = len(rows[0])
    if width < 2:
        raise EmptyDataset(f"{path}: need at least one variable column plus the target")
    matrix = np.empty((len(rows), width))
    for r, row in enumerate(rows):
        if len(row) != width:
            raise DatasetParseError("inconsistent column count", r, len(row))
        for c, cell in enumerate(row):
            try:
                value = float(cell)
            except ValueError:
                raise DatasetParseError(f"non-numeric cell {cell!r}", r, c) from None
            if not np.isfinite(value):
                raise DatasetParseError(f"non-finite cell {cell!r}", r, c)
            matrix[r, c] = value
    target = target_col if target_col >= 0 else width + target_col
    if not 0 <= target < width:
        raise ValueError(f"target column {target_col} out of range for {width} columns")
    variable_cols = [c for c in range(width) if c != target]
    variables = matrix[:, variable_cols].T
    targets = matrix[:, target]
    if names is not None:
        variable_names = tuple(names[c] for c in variable_cols)
    else:
        variable_names = ()
    return Dataset(variables=variables, targets=targets, variable_names=variable_names)


def kfold_split(n: int, k: int) -> FoldSplit:
    """Fold of pattern i is i mod k; deterministic and stable across runs."""
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > n:
        raise KTooLarge(f"k={k} exceeds the number of patterns {n}")
    return FoldSplit(k=k, assignments=np.arange(n) % k)


def split_fold(data: Dataset, split: FoldSplit, fold: int) -> tuple[Dataset, Dataset]:
    test_mask = split.assignments == fold
    train_mask = ~test_mask
    train = Dataset(
        variables=data.variables[:, train_mask],
        targets=data.targets[train_mask],
        variable_names=data.variable_names,
    )
    test = Dataset(
        variables=data.variables[:, test_mask],
        targets=data.targets[test_mask],
        variable_names=data.variable_names,
    )
    return train, test


def _mse_on(root: Node, data: Dataset) -> float:
    outputs = evaluate_semantics(root, data)[0]
    diff = outputs - data.targets
    return float(np.mean(diff * diff))


def evaluate_fold(root: Node, train: Dataset, test: Dataset) -> tuple[float, float | None]:
    """Train MSE plus held-out MSE; None when the tree leaves its domain on test."""
    train_mse = _mse_on(root, train)
    try:
        test_mse = _mse_on(root, test)
    except (DivisionByZero, NonFiniteResult):
        test_mse = None
    return train_mse, test_mse


def cross_validate(
    data: Dataset, k: int, hp: Hyperparameters
) -> tuple[CvResult, list[FitReport]]:
    """Fit once per fold on the fixed modulo split; aggregates recomputable from rows."""
    split = kfold_split(data.n_patterns, k)
    folds: list[FoldResult] = []
    reports: list[FitReport] = []
    for fold in range(k):
        train, test = split_fold(data, split, fold)
        start = time.perf_counter()
        report = fit(train, hp)
        seconds = time.perf_counter() - start
        train_mse, test_mse = evaluate_fold(report.tree, train, test)
        nodes, height = tree_metrics(report.tree)
        folds.append(
            FoldResult(
                fold=fold,
                train_mse=train_mse,
                test_mse=test_mse,
                expression=format_expression(report.tree, data.variable_names),
                nodes=nodes,
                height=height,
                seconds=seconds,
            )
        )
        reports.append(report)
    train_values = np.array([f.train_mse for f in folds])
    test_values = np.array([f.test_mse for f in folds if f.test_mse is not None])
    if test_values.size:
        mean_test = float(np.mean(test_values))
        std_test = float(np.std(test_values))
        median_test = float(np.median(test_values))
    else:
        mean_test = std_test = median_test = None
    result = CvResult(
        folds=tuple(folds),
        mean_train_mse=float(np.mean(train_values)),
        std_train_mse=float(np.std(train_values)),
        mean_test_mse=mean_test,
        std_test_mse=std_test,
        median_test_mse=median_test,
    )
    return result, reports
