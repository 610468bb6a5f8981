"""Per-node error equations and out-of-domain (forbidden) semantics tracking.

Every node of a valid tree carries a rational-quadratic map from candidate
semantics ``o`` to the whole-tree MSE::

    mse(o) = mean(((a * o - b) / (c * o - d)) ** 2)

plus a set of forbidden semantics whose values would re-introduce a division
by zero at some ancestor.  Forbidden vectors use an extended encoding:
``+inf`` marks a position where every real stays valid (the member can never
match there) and ``nan`` marks a position where no real is valid (the whole
set collapses to all-forbidden).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tree import ExprTree, Operation

ANY_ALLOWED = np.inf
NONE_ALLOWED = np.nan

# Relative tolerance when matching a candidate value against a forbidden value.
MATCH_RTOL = 1e-12
# Reject candidates whose equation denominator underflows this guard.
DENOMINATOR_GUARD = 1e-300


@dataclass(frozen=True)
class ForbiddenSet:
    """Either everything is forbidden, or a finite set of extended vectors."""

    all_forbidden: bool = False
    members: tuple[np.ndarray, ...] = ()


EMPTY_FORBIDDEN = ForbiddenSet()
ALL_FORBIDDEN = ForbiddenSet(all_forbidden=True)


def make_forbidden(members) -> ForbiddenSet:
    """Build a set from extended vectors: dedup, collapse on any none-allowed value."""
    unique: list[np.ndarray] = []
    seen = set()
    for m in members:
        m = np.asarray(m, dtype=np.float64)
        if np.isnan(m).any():
            return ALL_FORBIDDEN
        key = m.tobytes()
        if key not in seen:
            seen.add(key)
            m = m.copy()
            m.setflags(write=False)
            unique.append(m)
    return ForbiddenSet(False, tuple(unique))


@dataclass(frozen=True)
class NodeEquation:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    forbidden: ForbiddenSet = field(default_factory=lambda: EMPTY_FORBIDDEN)


def root_equation(targets: np.ndarray) -> NodeEquation:
    """a=1, b=targets, c=0, d=-1: the plain MSE against the targets."""
    targets = np.asarray(targets, dtype=np.float64)
    n = targets.shape[0]
    return NodeEquation(
        a=np.ones(n),
        b=targets,
        c=np.zeros(n),
        d=-np.ones(n),
        forbidden=EMPTY_FORBIDDEN,
    )


def _normalize_extended(values: np.ndarray) -> np.ndarray:
    # Collapse IEEE signs: -inf and +inf both mean "any value valid"; -0.0 -> 0.0.
    return np.where(np.isinf(values), ANY_ALLOWED, values + 0.0)


def invert_forbidden(member: np.ndarray, op: str, side: int, sibling: np.ndarray) -> np.ndarray:
    """Map a parent forbidden vector to the child on `side` (1=first, 2=second).

    Element-wise inverse of the node operation with respect to the sibling
    semantics; IEEE inf/nan arithmetic realizes the extended-value rules
    (any-op with none-allowed stays none-allowed, sums/differences with
    any-allowed stay any-allowed, 0/0 and any-allowed*0 become none-allowed).
    """
    member = np.asarray(member, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        if op == "+":
            out = member - sibling
        elif op == "-":
            out = member + sibling if side == 1 else sibling - member
        elif op == "*":
            out = member / sibling
        elif op == "/":
            out = member * sibling if side == 1 else sibling / member
        else:
            raise ValueError(f"unknown operator {op!r}")
    return _normalize_extended(out)


def derive_child_equation(
    parent: NodeEquation, op: str, side: int, sibling: np.ndarray
) -> NodeEquation:
    """Coefficients and forbidden set for one child, given the sibling's semantics."""
    a, b, c, d = parent.a, parent.b, parent.c, parent.d
    if op == "+":
        coeffs = (a, b - a * sibling, c, d - c * sibling)
    elif op == "-":
        if side == 1:
            coeffs = (a, b + a * sibling, c, d + c * sibling)
        else:
            coeffs = (a, a * sibling - b, c, c * sibling - d)
    elif op == "*":
        coeffs = (a * sibling, b, c * sibling, d)
    elif op == "/":
        if side == 1:
            coeffs = (a, b * sibling, c, d * sibling)
        else:
            coeffs = (b, a * sibling, d, c * sibling)
    else:
        raise ValueError(f"unknown operator {op!r}")

    divisor_side = op == "/" and side == 2
    if parent.forbidden.all_forbidden:
        forbidden = ALL_FORBIDDEN
    elif not parent.forbidden.members and not divisor_side:
        forbidden = EMPTY_FORBIDDEN
    else:
        members = [invert_forbidden(m, op, side, sibling) for m in parent.forbidden.members]
        if divisor_side:
            # The denominator itself must stay away from zero.
            members.append(np.zeros(sibling.shape[0]))
        forbidden = make_forbidden(members)
    return NodeEquation(*coeffs, forbidden)


def derive_child_equations(
    parent: NodeEquation, op: str, left_sem: np.ndarray, right_sem: np.ndarray
) -> tuple[NodeEquation, NodeEquation]:
    return (
        derive_child_equation(parent, op, 1, right_sem),
        derive_child_equation(parent, op, 2, left_sem),
    )


def propagate_equations(tree: ExprTree, targets: np.ndarray | None = None) -> list[NodeEquation]:
    """Top-down equation map for every node, in pre-order."""
    if targets is None:
        targets = tree.data.targets
    eqs: list[NodeEquation] = [None] * tree.node_count
    eqs[0] = root_equation(targets)
    for i, node in enumerate(tree.nodes):
        if isinstance(node, Operation):
            left, right = tree.children(i)
            eqs[left] = derive_child_equation(eqs[i], node.op, 1, tree.semantics[right])
            eqs[right] = derive_child_equation(eqs[i], node.op, 2, tree.semantics[left])
    return eqs


def path_equation(
    tree: ExprTree, node_id: int, targets: np.ndarray | None = None
) -> NodeEquation:
    """Equation of a single node, derived only along the root-to-node path."""
    if targets is None:
        targets = tree.data.targets
    chain = []
    p = node_id
    while p >= 0:
        chain.append(p)
        p = int(tree.parents[p])
    chain.reverse()
    eq = root_equation(targets)
    for anc, child in zip(chain, chain[1:]):
        node: Operation = tree.nodes[anc]
        left, right = tree.children(anc)
        if child == left:
            eq = derive_child_equation(eq, node.op, 1, tree.semantics[right])
        else:
            eq = derive_child_equation(eq, node.op, 2, tree.semantics[left])
    return eq


def forbidden_allows(forbidden: ForbiddenSet, candidate: np.ndarray) -> bool:
    """False when the candidate matches any forbidden value at any position."""
    if forbidden.all_forbidden:
        return False
    for member in forbidden.members:
        finite = np.isfinite(member)
        if not finite.any():
            continue
        values = member[finite]
        tol = MATCH_RTOL * np.maximum(1.0, np.abs(values))
        if np.any(np.abs(candidate[finite] - values) <= tol):
            return False
    return True


def equation_mse(eq: NodeEquation, candidate: np.ndarray) -> float | None:
    """MSE the tree would reach if this node produced `candidate`; None = rejected."""
    if not forbidden_allows(eq.forbidden, candidate):
        return None
    den = eq.c * candidate - eq.d
    if np.abs(den).min() < DENOMINATOR_GUARD:
        return None
    ratio = (eq.a * candidate - eq.b) / den
    mse = float(ratio.dot(ratio)) / ratio.shape[0]
    if not np.isfinite(mse):
        return None
    return mse


def constant_mse(eq: NodeEquation, k: float) -> float | None:
    """equation_mse at the constant semantics (k, ..., k), without building them."""
    forbidden = eq.forbidden
    if forbidden.all_forbidden:
        return None
    for member in forbidden.members:
        values = member[np.isfinite(member)] if np.isinf(member).any() else member
        if values.size and np.any(
            np.abs(k - values) <= MATCH_RTOL * np.maximum(1.0, np.abs(values))
        ):
            return None
    den = eq.c * k - eq.d
    if np.abs(den).min() < DENOMINATOR_GUARD:
        return None
    ratio = (eq.a * k - eq.b) / den
    mse = float(ratio.dot(ratio)) / ratio.shape[0]
    if not np.isfinite(mse):
        return None
    return mse
