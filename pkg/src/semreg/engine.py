"""Iterative improvement loop: the four strategies, constant optimization, stopping."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .equations import derive_child_equation, propagate_equations, root_equation
from .search import (
    SearchKind,
    SearchOutcome,
    constant_expression_search,
    constant_search,
    constant_variable_search,
    minimize_constant,
    variable_search,
)
from .tree import (
    Constant,
    Dataset,
    DivisionByZero,
    ExprTree,
    Node,
    NonFiniteResult,
    Variable,
    format_expression,
    replace_subtree,
)


class StopReason(str, Enum):
    GOAL_REACHED = "goal_reached"
    NO_IMPROVEMENT = "no_improvement"
    MAX_ITERATIONS = "max_iterations"


@dataclass(frozen=True)
class Hyperparameters:
    strategy: int = 1
    goal_mse: float = 0.0
    min_improvement: float = 1e-6
    max_nodes: int | None = None
    max_iterations: int | None = None

    def __post_init__(self):
        if self.strategy not in (1, 2, 3, 4):
            raise ValueError("strategy must be 1, 2, 3 or 4")
        if not 0.0 < self.min_improvement < 1.0:
            raise ValueError("min_improvement must lie in (0, 1)")
        if self.goal_mse < 0.0:
            raise ValueError("goal_mse must be >= 0")
        if self.max_nodes is not None and self.max_nodes < 1:
            raise ValueError("max_nodes must be >= 1")
        if self.max_iterations is not None and self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    search_kind: str | None
    node_id: int | None
    expression: str
    mse: float


@dataclass(frozen=True)
class FitReport:
    tree: Node
    expression: str
    mse: float
    trace: tuple[TraceRow, ...]
    stop_reason: StopReason
    iterations: int
    seconds: float


@dataclass
class FitState:
    """Mutable loop state; searches read it, accepted outcomes update it."""

    tree: ExprTree
    mse: float
    hp: Hyperparameters
    constant_rows: np.ndarray = field(init=False)
    zero_rows: np.ndarray = field(init=False)

    def __post_init__(self):
        variables = self.tree.data.variables
        self.constant_rows = np.all(variables == variables[:, :1], axis=1)
        self.zero_rows = np.any(variables == 0.0, axis=1)


def initial_tree(data: Dataset) -> ExprTree:
    """Single constant at the mean of the targets (the closest constant point)."""
    return ExprTree.build(Constant(float(np.mean(data.targets))), data)


def optimize_constants(tree: ExprTree, min_improvement: float) -> ExprTree:
    """Cyclically refit every constant leaf until no pass clears the threshold.

    Each pass derives equations lazily top-down: a constant edit never changes
    the equations on its own root path, so later derivations within the pass
    stay valid as long as sibling semantics are read from the edited tree.
    """
    root_eq = root_equation(tree.data.targets)
    mse = tree.root_mse()
    while True:
        changed = False
        eqs: list = [None] * tree.node_count
        for i in range(tree.node_count):
            if i == 0:
                eq = root_eq
            else:
                parent = int(tree.parents[i])
                pnode = tree.nodes[parent]
                left = parent + 1
                if i == left:
                    sibling = tree.semantics[left + int(tree.sizes[left])]
                    eq = derive_child_equation(eqs[parent], pnode.op, 1, sibling)
                else:
                    eq = derive_child_equation(eqs[parent], pnode.op, 2, tree.semantics[left])
            eqs[i] = eq
            if not isinstance(tree.nodes[i], Constant):
                continue
            fit = minimize_constant(eq)
            if fit is None or mse - fit.fitted_mse <= mse * min_improvement:
                continue
            try:
                tree = _apply_replacement(tree, i, Constant(fit.value))
            except (DivisionByZero, NonFiniteResult):
                continue
            mse = tree.root_mse()
            changed = True
        if not changed:
            return tree


def _optimize_constants_global(tree: ExprTree, min_improvement: float) -> ExprTree:
    """Alternative refit: one full equation map per pass, best constant applied."""
    mse = tree.root_mse()
    while True:
        eqs = propagate_equations(tree)
        best = None
        for node_id, nd in enumerate(tree.nodes):
            if not isinstance(nd, Constant):
                continue
            fit = minimize_constant(eqs[node_id])
            if fit is None or mse - fit.fitted_mse <= mse * min_improvement:
                continue
            if best is None or fit.fitted_mse < best[1].fitted_mse:
                best = (node_id, fit)
        if best is None:
            return tree
        node_id, fit = best
        try:
            tree = _apply_replacement(tree, node_id, Constant(fit.value))
        except (DivisionByZero, NonFiniteResult):
            return tree
        mse = tree.root_mse()


def _apply_replacement(tree: ExprTree, node_id: int, replacement: Node) -> ExprTree:
    return replace_subtree(tree, node_id, replacement)


def _node_groups(tree: ExprTree):
    constants, variables, nonterminals = [], [], []
    for i, nd in enumerate(tree.nodes):
        if isinstance(nd, Constant):
            constants.append(i)
        elif isinstance(nd, Variable):
            variables.append(i)
        else:
            nonterminals.append(i)
    return constants, variables, nonterminals


def _gather(state: FitState, eqs, specs) -> list[SearchOutcome]:
    """Run (kind, node-id) search requests, honoring the node-count growth gates."""
    tree = state.tree
    data = tree.data
    n = tree.node_count
    max_nodes = state.hp.max_nodes
    outcomes: list[SearchOutcome] = []
    for kind, node_ids in specs:
        for i in node_ids:
            eq = eqs[i]
            node = tree.nodes[i]
            if kind is SearchKind.CONSTANT:
                found = constant_search(i, eq, state.mse)
            elif kind is SearchKind.VARIABLE:
                exclude = node.index if isinstance(node, Variable) else -1
                found = variable_search(
                    i, eq, data.variables, state.constant_rows, state.mse, exclude
                )
            elif kind is SearchKind.CONSTANT_VARIABLE:
                if max_nodes is not None and max_nodes - n + int(tree.sizes[i]) < 3:
                    continue
                found = constant_variable_search(
                    i,
                    eq,
                    node,
                    data.variables,
                    state.constant_rows,
                    state.zero_rows,
                    state.mse,
                )
            else:
                if max_nodes is not None and max_nodes - n < 2:
                    continue
                found = constant_expression_search(i, eq, node, tree.semantics[i], state.mse)
            if found is not None:
                outcomes.append(found)
    return outcomes


def _try_apply(state: FitState, outcomes) -> SearchOutcome | None:
    """Apply the best outcome clearing the improvement threshold; discard any whose
    application overflows or re-introduces a zero denominator."""
    threshold = state.mse * state.hp.min_improvement
    eligible = [o for o in outcomes if o.predicted_reduction > threshold]
    for outcome in sorted(eligible, key=lambda o: o.sort_key):
        try:
            new_tree = _apply_replacement(state.tree, outcome.node_id, outcome.replacement)
        except (DivisionByZero, NonFiniteResult):
            continue
        state.tree = new_tree
        state.mse = new_tree.root_mse()
        return outcome
    return None


def run_strategy_iteration(state: FitState) -> SearchOutcome | None:
    """One iteration of the configured strategy; Some outcome when the tree changed."""
    strategy = state.hp.strategy
    eqs = propagate_equations(state.tree)
    constants, variables, nonterminals = _node_groups(state.tree)
    everything = range(state.tree.node_count)
    non_constant = variables + nonterminals

    if strategy == 1:
        applied = _try_apply(
            state,
            _gather(
                state,
                eqs,
                [
                    (SearchKind.CONSTANT, everything),
                    (SearchKind.VARIABLE, everything),
                    (SearchKind.CONSTANT_VARIABLE, everything),
                    (SearchKind.CONSTANT_EXPRESSION, nonterminals),
                ],
            ),
        )
        return applied

    if strategy == 2:
        applied = _try_apply(
            state,
            _gather(
                state,
                eqs,
                [
                    (SearchKind.CONSTANT, non_constant),
                    (SearchKind.VARIABLE, everything),
                    (SearchKind.CONSTANT_VARIABLE, everything),
                    (SearchKind.CONSTANT_EXPRESSION, nonterminals),
                ],
            ),
        )
        if applied is not None:
            _optimize_state(state)
        return applied

    if strategy == 4:
        applied = _try_apply(state, _gather(state, eqs, [(SearchKind.CONSTANT, constants)]))
        if applied is not None:
            return applied
        return _cascade(state, eqs)

    applied = _cascade(state, eqs)
    if applied is not None:
        _optimize_state(state)
    return applied


def _cascade(state: FitState, eqs) -> SearchOutcome | None:
    """Cheapest-first staged search shared by strategies 3 and 4."""
    constants, variables, nonterminals = _node_groups(state.tree)
    terminals = sorted(constants + variables)
    non_constant = sorted(variables + nonterminals)
    stages = [
        [(SearchKind.VARIABLE, constants)],
        [(SearchKind.CONSTANT_EXPRESSION, nonterminals)],
        [(SearchKind.CONSTANT_VARIABLE, terminals)],
        [
            (SearchKind.CONSTANT, non_constant),
            (SearchKind.VARIABLE, non_constant),
            (SearchKind.CONSTANT_VARIABLE, nonterminals),
        ],
    ]
    for specs in stages:
        applied = _try_apply(state, _gather(state, eqs, specs))
        if applied is not None:
            return applied
    return None


def _optimize_state(state: FitState) -> None:
    state.tree = optimize_constants(state.tree, state.hp.min_improvement)
    state.mse = state.tree.root_mse()


def fit(data: Dataset, hp: Hyperparameters | None = None) -> FitReport:
    """Grow a single expression from the mean constant until a stop criterion fires.

    Deterministic: identical data and hyperparameters reproduce the identical
    report (wall-clock time aside).
    """
    hp = hp or Hyperparameters()
    start = time.perf_counter()
    names = data.variable_names
    state = FitState(tree=initial_tree(data), mse=0.0, hp=hp)
    state.mse = state.tree.root_mse()
    trace = [TraceRow(0, None, None, format_expression(state.tree.root, names), state.mse)]
    iterations = 0
    while True:
        if state.mse <= hp.goal_mse:
            reason = StopReason.GOAL_REACHED
            break
        if hp.max_iterations is not None and iterations >= hp.max_iterations:
            reason = StopReason.MAX_ITERATIONS
            break
        applied = run_strategy_iteration(state)
        iterations += 1
        if applied is None:
            reason = StopReason.NO_IMPROVEMENT
            break
        trace.append(
            TraceRow(
                iterations,
                applied.search_kind.label,
                applied.node_id,
                format_expression(state.tree.root, names),
                state.mse,
            )
        )
    seconds = time.perf_counter() - start
    return FitReport(
        tree=state.tree.root,
        expression=format_expression(state.tree.root, names),
        mse=state.mse,
        trace=tuple(trace),
        stop_reason=reason,
        iterations=iterations,
        seconds=seconds,
    )
