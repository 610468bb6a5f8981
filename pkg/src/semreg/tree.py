"""Arithmetic expression trees: structure, dataset-bound evaluation, edits, text I/O."""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

OPS = ("+", "-", "*", "/")


class DivisionByZero(ArithmeticError):
    """A division node whose denominator is exactly 0 for some pattern."""

    def __init__(self, node_id: int, pattern: int):
        super().__init__(f"division by zero at node {node_id}, pattern {pattern}")
        self.node_id = node_id
        self.pattern = pattern


class NonFiniteResult(ArithmeticError):
    """Evaluation overflowed to inf/nan at some node."""

    def __init__(self, node_id: int):
        super().__init__(f"non-finite semantics at node {node_id}")
        self.node_id = node_id


class InvalidNodeId(IndexError):
    pass


class ParseError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


@dataclass(frozen=True)
class Dataset:
    """Training table: `variables` is L rows (one per variable) by N columns (patterns)."""

    variables: np.ndarray
    targets: np.ndarray
    variable_names: tuple[str, ...] = ()

    def __post_init__(self):
        variables = np.asarray(self.variables, dtype=np.float64)
        targets = np.asarray(self.targets, dtype=np.float64)
        if variables.ndim != 2 or variables.shape[0] < 1 or variables.shape[1] < 1:
            raise ValueError("variables must be a non-empty L x N matrix")
        if targets.shape != (variables.shape[1],):
            raise ValueError("targets length must equal the number of patterns")
        if not np.all(np.isfinite(variables)) or not np.all(np.isfinite(targets)):
            raise ValueError("dataset values must be finite")
        names = tuple(self.variable_names) or tuple(
            f"x{i + 1}" for i in range(variables.shape[0])
        )
        if len(names) != variables.shape[0]:
            raise ValueError("variable_names length must equal the number of variables")
        variables.setflags(write=False)
        targets.setflags(write=False)
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "variable_names", names)

    @property
    def n_variables(self) -> int:
        return self.variables.shape[0]

    @property
    def n_patterns(self) -> int:
        return self.variables.shape[1]


@dataclass(frozen=True)
class Constant:
    value: float


@dataclass(frozen=True)
class Variable:
    index: int


@dataclass(frozen=True)
class Operation:
    op: str
    left: "Node"
    right: "Node"


Node = Constant | Variable | Operation


def evaluate_semantics(root: Node, data: Dataset) -> list[np.ndarray]:
    """Evaluate a tree bottom-up, returning per-node semantics in pre-order.

    Raises DivisionByZero for an exactly-zero denominator and NonFiniteResult
    if any node's outputs overflow; engine-built trees never trigger either.
    """
    sems: list[np.ndarray] = []
    n = data.n_patterns

    def rec(node: Node) -> np.ndarray:
        node_id = len(sems)
        sems.append(None)  # reserve pre-order slot
        if isinstance(node, Constant):
            sem = np.full(n, node.value, dtype=np.float64)
        elif isinstance(node, Variable):
            if not 0 <= node.index < data.n_variables:
                raise ValueError(f"variable index {node.index} out of range")
            sem = data.variables[node.index]
        else:
            left = rec(node.left)
            right = rec(node.right)
            if node.op == "+":
                sem = left + right
            elif node.op == "-":
                sem = left - right
            elif node.op == "*":
                sem = left * right
            elif node.op == "/":
                if not right.all():
                    raise DivisionByZero(node_id, int(np.nonzero(right == 0.0)[0][0]))
                sem = left / right
            else:
                raise ValueError(f"unknown operator {node.op!r}")
        if not np.isfinite(sem).all():
            raise NonFiniteResult(node_id)
        sems[node_id] = sem
        return sem

    rec(root)
    return sems


def _preorder(root: Node) -> tuple[list[Node], np.ndarray, np.ndarray]:
    """Pre-order node list plus subtree sizes and parent indices (-1 for root)."""
    nodes: list[Node] = []
    sizes: list[int] = []
    parents: list[int] = []

    def rec(node: Node, parent: int) -> int:
        i = len(nodes)
        nodes.append(node)
        sizes.append(1)
        parents.append(parent)
        if isinstance(node, Operation):
            sizes[i] += rec(node.left, i)
            sizes[i] += rec(node.right, i)
        return sizes[i]

    rec(root, -1)
    return nodes, np.asarray(sizes), np.asarray(parents)


class ExprTree:
    """Immutable expression bound to a dataset, with cached per-node semantics.

    Nodes are addressed by pre-order index; edits return new trees that share
    the untouched subtrees (and their cached semantics) with the original.
    """

    __slots__ = ("data", "nodes", "semantics", "sizes", "parents")

    def __init__(self, data, nodes, semantics, sizes, parents):
        self.data = data
        self.nodes = nodes
        self.semantics = semantics
        self.sizes = sizes
        self.parents = parents

    @classmethod
    def build(cls, root: Node, data: Dataset) -> "ExprTree":
        semantics = evaluate_semantics(root, data)
        nodes, sizes, parents = _preorder(root)
        return cls(data, nodes, semantics, sizes, parents)

    @property
    def root(self) -> Node:
        return self.nodes[0]

    @property
    def root_semantics(self) -> np.ndarray:
        return self.semantics[0]

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    def subtree(self, node_id: int) -> Node:
        if not 0 <= node_id < len(self.nodes):
            raise InvalidNodeId(node_id)
        return self.nodes[node_id]

    def children(self, node_id: int) -> tuple[int, int]:
        left = node_id + 1
        right = left + int(self.sizes[left])
        return left, right

    def root_mse(self) -> float:
        diff = self.semantics[0] - self.data.targets
        return float(np.mean(diff * diff))


def tree_metrics(tree) -> tuple[int, int]:
    """(node count, height); height counts nodes on the longest root-to-leaf path."""
    if isinstance(tree, ExprTree):
        parents = tree.parents
        depth = np.ones(len(parents), dtype=np.int64)
        for i in range(1, len(parents)):
            depth[i] = depth[parents[i]] + 1
        return len(parents), int(depth.max())
    nodes, sizes, parents = _preorder(tree)
    depth = np.ones(len(parents), dtype=np.int64)
    for i in range(1, len(parents)):
        depth[i] = depth[parents[i]] + 1
    return len(nodes), int(depth.max())


def replace_subtree(tree: ExprTree, node_id: int, replacement: Node) -> ExprTree:
    """Substitute the addressed subtree, recomputing semantics on the root path only.

    Re-validates the affected path; raises DivisionByZero/NonFiniteResult when the
    replacement makes the tree invalid on the training data.
    """
    if not 0 <= node_id < len(tree.nodes):
        raise InvalidNodeId(node_id)
    rep_sems = evaluate_semantics(replacement, tree.data)
    rep_nodes, rep_sizes, rep_parents = _preorder(replacement)
    old_size = int(tree.sizes[node_id])
    end = node_id + old_size
    delta = len(rep_nodes) - old_size

    nodes = tree.nodes[:node_id] + rep_nodes + tree.nodes[end:]
    semantics = tree.semantics[:node_id] + rep_sems + tree.semantics[end:]

    leaf_swap = old_size == 1 and len(rep_nodes) == 1
    if leaf_swap:
        sizes = tree.sizes
        parents = tree.parents
    else:
        sizes = np.empty(len(nodes), dtype=np.int64)
        sizes[:node_id] = tree.sizes[:node_id]
        sizes[node_id : node_id + len(rep_nodes)] = rep_sizes
        sizes[node_id + len(rep_nodes) :] = tree.sizes[end:]

        parents = np.empty(len(nodes), dtype=np.int64)
        parents[:node_id] = tree.parents[:node_id]
        parents[node_id : node_id + len(rep_nodes)] = np.where(
            rep_parents < 0, tree.parents[node_id], rep_parents + node_id
        )
        shifted = tree.parents[end:].copy()
        shifted[shifted >= end] += delta
        parents[node_id + len(rep_nodes) :] = shifted

    # Ancestors keep their pre-order ids; grow them and rebuild their semantics.
    ancestors = []
    p = int(tree.parents[node_id]) if node_id > 0 else -1
    while p >= 0:
        ancestors.append(p)
        if not leaf_swap:
            sizes[p] += delta
        p = int(tree.parents[p])

    child_struct = replacement
    for anc in ancestors:
        left_id = anc + 1
        right_id = left_id + int(sizes[left_id])
        old_op: Operation = tree.nodes[anc]
        if left_id <= node_id < left_id + int(sizes[left_id]):
            new_node = Operation(old_op.op, child_struct, old_op.right)
        else:
            new_node = Operation(old_op.op, old_op.left, child_struct)
        left_sem = semantics[left_id]
        right_sem = semantics[right_id]
        if old_op.op == "+":
            sem = left_sem + right_sem
        elif old_op.op == "-":
            sem = left_sem - right_sem
        elif old_op.op == "*":
            sem = left_sem * right_sem
        else:
            if not right_sem.all():
                raise DivisionByZero(anc, int(np.nonzero(right_sem == 0.0)[0][0]))
            sem = left_sem / right_sem
        if not np.isfinite(sem).all():
            raise NonFiniteResult(anc)
        nodes[anc] = new_node
        semantics[anc] = sem
        child_struct = new_node
    return ExprTree(tree.data, nodes, semantics, sizes, parents)


def _format_constant(value: float) -> str:
    return format(value, ".17g")


def format_expression(node: Node, names=None) -> str:
    """Fully parenthesized infix text; constants printed at full 64-bit precision."""
    if isinstance(node, Constant):
        return _format_constant(node.value)
    if isinstance(node, Variable):
        if names is not None:
            return names[node.index]
        return f"x{node.index + 1}"
    return (
        f"({format_expression(node.left, names)} {node.op}"
        f" {format_expression(node.right, names)})"
    )


_TOKEN = re.compile(
    r"\s*(?:(?P<num>[0-9]+(?:\.[0-9]*)?(?:[eE][+-]?[0-9]+)?"
    r"|\.[0-9]+(?:[eE][+-]?[0-9]+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<punct>[()+\-*/]))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        if m.group("num") is not None:
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.group("name") is not None:
            tokens.append(("name", m.group("name"), m.start("name")))
        else:
            tokens.append(("punct", m.group("punct"), m.start("punct")))
        pos = m.end()
    return tokens


def parse_expression(text: str, names=None) -> Node:
    """Parse fully parenthesized infix text over +,-,*,/ with named variables.

    Inverse of format_expression: parse(format(t)) is structurally equal to t.
    """
    tokens = _tokenize(text)
    index = 0
    name_map = {name: i for i, name in enumerate(names)} if names is not None else None

    def peek():
        return tokens[index] if index < len(tokens) else ("end", "", len(text))

    def take():
        nonlocal index
        tok = peek()
        index += 1
        return tok

    def parse_node() -> Node:
        kind, value, pos = take()
        if kind == "punct" and value == "(":
            left = parse_node()
            okind, op, opos = take()
            if okind != "punct" or op not in OPS:
                raise ParseError("expected operator", opos)
            right = parse_node()
            ckind, cval, cpos = take()
            if ckind != "punct" or cval != ")":
                raise ParseError("expected ')'", cpos)
            return Operation(op, left, right)
        if kind == "punct" and value in ("-", "+"):
            nkind, nval, npos = take()
            if nkind != "num":
                raise ParseError("expected number after sign", npos)
            k = float(nval)
            return Constant(-k if value == "-" else k)
        if kind == "num":
            return Constant(float(value))
        if kind == "name":
            if name_map is not None:
                if value not in name_map:
                    raise ParseError(f"unknown variable {value!r}", pos)
                return Variable(name_map[value])
            m = re.fullmatch(r"x([0-9]+)", value)
            if m is None or int(m.group(1)) < 1:
                raise ParseError(f"unknown variable {value!r}", pos)
            return Variable(int(m.group(1)) - 1)
        raise ParseError("expected expression", pos)

    node = parse_node()
    if index != len(tokens):
        raise ParseError("trailing input", tokens[index][2])
    return node
