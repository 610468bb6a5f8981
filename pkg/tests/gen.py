"""Seeded random generators for valid trees and datasets used by property tests."""

from __future__ import annotations

import numpy as np

from semreg import Constant, Dataset, ExprTree, Operation, Variable
from semreg.tree import OPS

# Keep generated arithmetic well conditioned: denominators away from zero and
# magnitudes bounded, so float error stays far below the asserted tolerances.
MIN_DENOMINATOR = 0.3
MAX_MAGNITUDE = 1e5


def random_dataset(rng: np.random.Generator, n_vars: int = 5, n_patterns: int = 20) -> Dataset:
    variables = rng.uniform(-3.0, 3.0, (n_vars, n_patterns))
    targets = rng.uniform(-5.0, 5.0, n_patterns)
    return Dataset(variables=variables, targets=targets)


def _leaf(rng: np.random.Generator, data: Dataset):
    if rng.random() < 0.5:
        index = int(rng.integers(data.n_variables))
        return Variable(index), data.variables[index], 1
    value = float(np.round(rng.uniform(-4.0, 4.0), 3))
    return Constant(value), np.full(data.n_patterns, value), 1


def _subtree(rng: np.random.Generator, data: Dataset, budget: int):
    if budget < 3 or rng.random() < 0.3:
        return _leaf(rng, data)
    for _ in range(30):
        op = OPS[int(rng.integers(4))]
        left_budget = int(rng.integers(1, budget - 1))
        left, left_sem, left_size = _subtree(rng, data, left_budget)
        right, right_sem, right_size = _subtree(rng, data, budget - 1 - left_size)
        if op == "/" and np.abs(right_sem).min() < MIN_DENOMINATOR:
            continue
        if op == "+":
            sem = left_sem + right_sem
        elif op == "-":
            sem = left_sem - right_sem
        elif op == "*":
            sem = left_sem * right_sem
        else:
            sem = left_sem / right_sem
        if not np.isfinite(sem).all() or np.abs(sem).max() > MAX_MAGNITUDE:
            continue
        return Operation(op, left, right), sem, 1 + left_size + right_size
    return _leaf(rng, data)


def random_structure(rng: np.random.Generator, data: Dataset, max_nodes: int = 25):
    """Random valid structural tree plus its root semantics."""
    node, sem, _ = _subtree(rng, data, max_nodes)
    return node, sem


def random_valid_tree(rng: np.random.Generator, data: Dataset, max_nodes: int = 25) -> ExprTree:
    node, _ = random_structure(rng, data, max_nodes)
    return ExprTree.build(node, data)


def random_tree_with_division(
    rng: np.random.Generator, data: Dataset, max_nodes: int = 15
) -> ExprTree:
    """Like random_valid_tree but guaranteed to contain at least one division."""
    for _ in range(200):
        tree = random_valid_tree(rng, data, max_nodes)
        if any(isinstance(nd, Operation) and nd.op == "/" for nd in tree.nodes):
            return tree
    raise AssertionError("failed to generate a division-bearing tree")


# ---------------------------------------------------------------------------
# Random node equations per closed-form branch, and a dense grid oracle.

def _signed_uniform(rng, low, high, n):
    return rng.uniform(low, high, n) * rng.choice([-1.0, 1.0], n)


def random_equation_linear(rng: np.random.Generator, n: int = 20):
    """c = 0 everywhere, d nonzero everywhere: the parabola branches."""
    import semreg

    a = rng.normal(0.0, 1.0, n)
    if not a.any():
        a[0] = 1.0
    b = rng.normal(0.0, 2.0, n)
    d = _signed_uniform(rng, 0.5, 2.0, n)
    return semreg.NodeEquation(a=a, b=b, c=np.zeros(n), d=d)


def random_equation_pole_at_origin(rng: np.random.Generator, n: int = 20):
    """c nonzero everywhere, d = 0 everywhere."""
    import semreg

    a = rng.normal(0.0, 1.0, n)
    b = _signed_uniform(rng, 0.2, 2.0, n)
    c = _signed_uniform(rng, 0.5, 2.0, n)
    return semreg.NodeEquation(a=a, b=b, c=c, d=np.zeros(n))


def random_equation_constant_pole(rng: np.random.Generator, n: int = 20):
    """c and d constant and nonzero: a single movable pole."""
    import semreg

    a = rng.normal(0.0, 1.0, n)
    b = rng.normal(0.0, 2.0, n)
    kc = float(_signed_uniform(rng, 0.5, 2.0, 1)[0])
    kd = float(_signed_uniform(rng, 0.5, 2.0, 1)[0])
    return semreg.NodeEquation(a=a, b=b, c=np.full(n, kc), d=np.full(n, kd))


def harvest_scan_equations(rng: np.random.Generator, count: int, n_patterns: int = 20):
    """Equations from propagated random trees that reach the zero-candidate scan."""
    import semreg
    from semreg.search import minimize_constant

    found = []
    while len(found) < count:
        data = random_dataset(rng, n_vars=4, n_patterns=n_patterns)
        tree = random_tree_with_division(rng, data, max_nodes=15)
        for eq in semreg.propagate_equations(tree):
            fit = minimize_constant(eq)
            if fit is not None and fit.case_used == "zero_scan":
                found.append((eq, fit))
                if len(found) >= count:
                    break
    return found


def oracle_grid() -> np.ndarray:
    """~1e5 candidate constants: log-spaced magnitudes plus a dense linear band."""
    logs = np.logspace(-9.0, 9.0, 25000)
    return np.concatenate([-logs, logs, np.linspace(-50.0, 50.0, 50001)])


def oracle_min_mse(eq, grid: np.ndarray, chunk: int = 20000) -> float:
    """Smallest objective value over the grid, honoring the forbidden set only."""
    import semreg

    best = np.inf
    for start in range(0, grid.shape[0], chunk):
        z = grid[start : start + chunk]
        keep = np.ones(z.shape[0], dtype=bool)
        for member in eq.forbidden.members:
            values = member[np.isfinite(member)]
            if values.size == 0:
                continue
            tol = 1e-12 * np.maximum(1.0, np.abs(values))
            keep &= ~(np.abs(z[:, None] - values[None, :]) <= tol[None, :]).any(axis=1)
        z = z[keep]
        if z.size == 0:
            continue
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            den = np.multiply.outer(z, eq.c) - eq.d
            ok = np.abs(den).min(axis=1) >= 1e-300
            ratio = (np.multiply.outer(z, eq.a) - eq.b) / den
            mse = np.mean(ratio * ratio, axis=1)
        mse = mse[ok & np.isfinite(mse)]
        if mse.size:
            best = min(best, float(mse.min()))
    return best
