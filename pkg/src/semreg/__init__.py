"""Deterministic symbolic regression by greedy semantic-space tree growth."""

from .data import (
    CvResult,
    DatasetParseError,
    EmptyDataset,
    FoldResult,
    FoldSplit,
    KTooLarge,
    cross_validate,
    evaluate_fold,
    kfold_split,
    load_dataset,
    split_fold,
)
from .engine import (
    FitReport,
    FitState,
    Hyperparameters,
    StopReason,
    TraceRow,
    fit,
    initial_tree,
    optimize_constants,
    run_strategy_iteration,
)
from .equations import (
    ANY_ALLOWED,
    NONE_ALLOWED,
    ForbiddenSet,
    NodeEquation,
    derive_child_equation,
    derive_child_equations,
    equation_mse,
    forbidden_allows,
    invert_forbidden,
    make_forbidden,
    path_equation,
    propagate_equations,
    root_equation,
)
from .search import (
    ConstantFit,
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
    InvalidNodeId,
    NonFiniteResult,
    Operation,
    ParseError,
    Variable,
    evaluate_semantics,
    format_expression,
    parse_expression,
    replace_subtree,
    tree_metrics,
)

__all__ = [name for name in dir() if not name.startswith("_")]
