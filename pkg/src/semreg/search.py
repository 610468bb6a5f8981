"""Candidate-subtree searches: constants, variables, and small growth templates."""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .equations import (
    MATCH_RTOL,
    DENOMINATOR_GUARD,
    NodeEquation,
    constant_mse,
    derive_child_equation,
    equation_mse,
)
from .tree import OPS, Constant, Node, Operation, Variable

# Candidate zeros this close (relative) to a pole of the equation are discarded.
POLE_RTOL = 1e-9


class SearchKind(IntEnum):
    """Order doubles as the deterministic tie-break priority."""

    CONSTANT = 0
    VARIABLE = 1
    CONSTANT_VARIABLE = 2
    CONSTANT_EXPRESSION = 3

    @property
    def label(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class SearchOutcome:
    node_id: int
    replacement: Node
    predicted_reduction: float
    search_kind: SearchKind
    var_index: int = -1
    op_rank: int = -1

    @property
    def sort_key(self):
        return (
            -self.predicted_reduction,
            int(self.search_kind),
            self.node_id,
            self.var_index,
            self.op_rank,
        )


@dataclass(frozen=True)
class ConstantFit:
    """Best constant for a node equation and the closed-form branch that found it."""

    value: float
    fitted_mse: float
    case_used: str


def _finish_closed_form(eq: NodeEquation, k: float, case: str) -> ConstantFit | None:
    if not np.isfinite(k):
        return None
    mse = constant_mse(eq, k)
    if mse is None:
        return None
    return ConstantFit(float(k), mse, case)


def _zero_candidate_scan(eq: NodeEquation) -> ConstantFit | None:
    a, b, c, d = eq.a, eq.b, eq.c, eq.d
    mask = a != 0.0
    if not mask.any():
        return None
    with np.errstate(over="ignore"):
        z = b[mask] / a[mask]
    z = z[np.isfinite(z)]
    if z.size == 0:
        return None
    # Forbidden values rule out matching candidates outright.
    keep = np.ones(z.shape[0], dtype=bool)
    for member in eq.forbidden.members:
        values = member[np.isfinite(member)]
        if values.size == 0:
            continue
        tol = MATCH_RTOL * np.maximum(1.0, np.abs(values))
        hit = np.abs(z[:, None] - values[None, :]) <= tol[None, :]
        keep &= ~hit.any(axis=1)
    z = z[keep]
    if z.size == 0:
        return None
    with np.errstate(over="ignore", invalid="ignore"):
        den = np.multiply.outer(z, c)
        den -= d
        min_den = np.abs(den).min(axis=1)
        far = min_den >= POLE_RTOL * (1.0 + np.abs(z))
        if not far.any():
            return None
        z = z[far]
        den = den[far]
        ratio = np.multiply.outer(z, a)
        ratio -= b
        ratio /= den
        ratio *= ratio
        mse = ratio.mean(axis=1)
    valid = np.isfinite(mse)
    if not valid.any():
        return None
    mse = np.where(valid, mse, np.inf)
    best = int(np.argmin(mse))
    return ConstantFit(float(z[best]), float(mse[best]), "zero_scan")


def _is_local_minimum(eq: NodeEquation, fit: ConstantFit) -> bool:
    step = 1e-4 * (1.0 + abs(fit.value))
    for k in (fit.value - step, fit.value + step):
        mse = constant_mse(eq, k)
        if mse is not None and mse < fit.fitted_mse:
            return False
    return True


def minimize_constant(eq: NodeEquation) -> ConstantFit | None:
    """Constant k minimizing the node equation, or None when no minimum exists.

    Dispatches on the structure of the denominator coefficients; when no
    closed form applies, scans the zeros of the numerator terms (the true
    minimum is near one of them) and returns the best valid candidate.
    """
    if eq.forbidden.all_forbidden:
        return None
    a, b, c, d = eq.a, eq.b, eq.c, eq.d
    if not c.any():  # c == 0 everywhere
        if not a.any():
            return None  # constant objective
        if not d.all():  # some d == 0
            return None
        a_const = (a == a[0]).all()
        d_const = (d == d[0]).all()
        with np.errstate(over="ignore", invalid="ignore"):
            if a_const and d_const:
                k = float(np.mean(b)) / a[0]
                case = "mean"
            elif a_const:
                w = 1.0 / (d * d)
                k = float(np.sum(b * w) / np.sum(w)) / a[0]
                case = "weighted_mean"
            elif d_const:
                k = float(np.sum(a * b) / np.sum(a * a))
                case = "projection"
            else:
                w = 1.0 / (d * d)
                k = float(np.sum(a * b * w) / np.sum(a * a * w))
                case = "weighted_least_squares"
        return _finish_closed_form(eq, k, case)
    c_zero = c == 0.0
    d_zero = d == 0.0
    if (c_zero & d_zero).any():
        return None  # identically-zero denominator term
    if c.all() and not d.any():
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            w = 1.0 / (c * c)
            den = np.sum(a * b * w)
            k = float(np.sum(b * b * w) / den) if den != 0.0 else np.nan
        return _finish_closed_form(eq, k, "reciprocal_least_squares")
    c_const = (c == c[0]).all()
    d_const = (d == d[0]).all()
    if c_const and d_const:
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            common = b * c[0] - a * d[0]
            den = np.sum(a * common)
            k = float(np.sum(b * common) / den) if den != 0.0 else np.nan
        if np.isfinite(k):
            fit = _finish_closed_form(eq, k, "constant_pole")
            if fit is not None and _is_local_minimum(eq, fit):
                return fit
        # Stationary point invalid or a maximum: fall through to the scan.
    return _zero_candidate_scan(eq)


def constant_search(node_id: int, eq: NodeEquation, current_mse: float) -> SearchOutcome | None:
    fit = minimize_constant(eq)
    if fit is None:
        return None
    reduction = current_mse - fit.fitted_mse
    if reduction <= 0.0:
        return None
    return SearchOutcome(node_id, Constant(fit.value), reduction, SearchKind.CONSTANT)


def variable_search(
    node_id: int,
    eq: NodeEquation,
    variables: np.ndarray,
    constant_rows: np.ndarray,
    current_mse: float,
    exclude: int = -1,
) -> SearchOutcome | None:
    """Best single variable whose semantics improve this node, if any."""
    if eq.forbidden.all_forbidden:
        return None
    best = None
    best_reduction = 0.0
    for index in range(variables.shape[0]):
        if index == exclude or constant_rows[index]:
            continue
        mse = equation_mse(eq, variables[index])
        if mse is None:
            continue
        reduction = current_mse - mse
        if reduction > best_reduction:
            best_reduction = reduction
            best = SearchOutcome(
                node_id, Variable(index), reduction, SearchKind.VARIABLE, var_index=index
            )
    return best


def _constant_child_outcome(
    eq: NodeEquation, op: str, sibling: np.ndarray, current_mse: float
) -> tuple[float, float] | None:
    """Fit the first-child constant of (op, k, sibling); (k, reduction) if positive."""
    child_eq = derive_child_equation(eq, op, 1, sibling)
    if child_eq.forbidden.all_forbidden:
        return None
    fit = minimize_constant(child_eq)
    if fit is None:
        return None
    reduction = current_mse - fit.fitted_mse
    if reduction <= 0.0:
        return None
    return fit.value, reduction


def constant_variable_search(
    node_id: int,
    eq: NodeEquation,
    node: Node,
    variables: np.ndarray,
    constant_rows: np.ndarray,
    zero_rows: np.ndarray,
    current_mse: float,
) -> SearchOutcome | None:
    """Best 3-node replacement (op, constant, variable), constant as first child."""
    if eq.forbidden.all_forbidden:
        return None
    best = None
    best_reduction = 0.0
    for index in range(variables.shape[0]):
        if constant_rows[index]:
            continue
        row = variables[index]
        for op_rank, op in enumerate(OPS):
            if (
                isinstance(node, Operation)
                and node.op == op
                and isinstance(node.left, Constant)
                and node.right == Variable(index)
            ):
                continue  # would only hide a constant search on the existing leaf
            if op == "/" and zero_rows[index]:
                continue  # variable with zeros cannot be a divisor
            found = _constant_child_outcome(eq, op, row, current_mse)
            if found is None:
                continue
            k, reduction = found
            if reduction > best_reduction:
                best_reduction = reduction
                best = SearchOutcome(
                    node_id,
                    Operation(op, Constant(k), Variable(index)),
                    reduction,
                    SearchKind.CONSTANT_VARIABLE,
                    var_index=index,
                    op_rank=op_rank,
                )
    return best


def constant_expression_search(
    node_id: int,
    eq: NodeEquation,
    node: Node,
    node_semantics: np.ndarray,
    current_mse: float,
) -> SearchOutcome | None:
    """Grow a non-terminal p into (k + p) or (k * p), keeping the subtree."""
    if not isinstance(node, Operation) or eq.forbidden.all_forbidden:
        return None
    has_constant_child = isinstance(node.left, Constant) or isinstance(node.right, Constant)
    best = None
    best_reduction = 0.0
    for op in ("+", "*"):
        if op == "+" and node.op in ("+", "-") and has_constant_child:
            continue
        if op == "*" and node.op in ("*", "/") and has_constant_child:
            continue
        found = _constant_child_outcome(eq, op, node_semantics, current_mse)
        if found is None:
            continue
        k, reduction = found
        if reduction > best_reduction:
            best_reduction = reduction
            best = SearchOutcome(
                node_id,
                Operation(op, Constant(k), node),
                reduction,
                SearchKind.CONSTANT_EXPRESSION,
                op_rank=OPS.index(op),
            )
    return best
