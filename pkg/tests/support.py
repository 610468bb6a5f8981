"""Shared fixtures: the worked 11-node example and report-audit helpers."""

from __future__ import annotations

import numpy as np

import semreg

# 2/((3/(1-2/x3))+1) over x3=(1,4,-2), targets (5,4,1): the worked example whose
# per-node semantics, equation coefficients, and forbidden sets are known.
EXAMPLE_TEXT = "(2 / ((3 / (1 - (2 / x3))) + 1))"
EXAMPLE_TARGETS = (5.0, 4.0, 1.0)
EXAMPLE_X3 = (1.0, 4.0, -2.0)

# Per 1-based node id: semantics, (a, b, c, d), forbidden members.
EXAMPLE_TABLE = {
    1: ((-1.0, 2.0 / 7.0, 0.8), ((1, 1, 1), (5, 4, 1), (0, 0, 0), (-1, -1, -1)), ()),
    2: ((2.0, 2.0, 2.0), ((1, 1, 1), (-10, 28, 2.5), (0, 0, 0), (-2, 7, 2.5)), ()),
    3: ((-2.0, 7.0, 2.5), ((-5, -4, -1), (-2, -2, -2), (1, 1, 1), (0, 0, 0)), ((0, 0, 0),)),
    4: ((-3.0, 6.0, 1.5), ((-5, -4, -1), (3, 2, -1), (1, 1, 1), (-1, -1, -1)), ((-1, -1, -1),)),
    5: ((3.0, 3.0, 3.0), ((-5, -4, -1), (-3, 1, -2), (1, 1, 1), (1, -0.5, -2)), ((1, -0.5, -2),)),
    6: (
        (-1.0, 0.5, 2.0),
        ((-3, -2, 1), (15, 12, 3), (1, 1, 1), (-3, -3, -3)),
        ((0, 0, 0), (-3, -3, -3)),
    ),
    7: (
        (1.0, 1.0, 1.0),
        ((-3, -2, 1), (9, 11, 2), (1, 1, 1), (-1, -2.5, -4)),
        ((2, 0.5, -1), (-1, -2.5, -4)),
    ),
    8: (
        (2.0, 0.5, -1.0),
        ((3, 2, -1), (18, 14, 2), (-1, -1, -1), (-4, -4, -4)),
        ((1, 1, 1), (4, 4, 4)),
    ),
    9: (
        (2.0, 2.0, 2.0),
        ((3, 2, -1), (18, 56, -4), (-1, -1, -1), (-4, -16, 8)),
        ((1, 4, -2), (4, 16, -8)),
    ),
    10: (
        (1.0, 4.0, -2.0),
        ((-18, -14, -2), (-6, -4, 2), (4, 4, 4), (2, 2, 2)),
        ((0, 0, 0), (2, 2, 2), (0.5, 0.5, 0.5)),
    ),
    11: (
        (1.0, 1.0, 1.0),
        ((-5, -4, -1), (-17, 22, -0.5), (1, 1, 1), (3, -6, -1.5)),
        ((3, -6, -1.5),),
    ),
}


def example_tree() -> semreg.ExprTree:
    data = semreg.Dataset(
        variables=np.array([[7.0, -1.0, 3.0], [2.0, 5.0, -4.0], list(EXAMPLE_X3)]),
        targets=np.array(EXAMPLE_TARGETS),
    )
    root = semreg.parse_expression(EXAMPLE_TEXT, data.variable_names)
    return semreg.ExprTree.build(root, data)


def _pair_matches(p, q, tol=1e-9) -> bool:
    direct = abs(p[0] - q[0]) <= tol and abs(p[1] - q[1]) <= tol
    flipped = abs(p[0] + q[0]) <= tol and abs(p[1] + q[1]) <= tol
    return direct or flipped


def equation_matches(eq: semreg.NodeEquation, expected) -> bool:
    """Squared-ratio equivalence: numerator and denominator pairs match up to
    an independent per-element sign flip."""
    ea, eb, ec, ed = (np.asarray(v, dtype=float) for v in expected)
    for i in range(len(ea)):
        if not _pair_matches((eq.a[i], eq.b[i]), (ea[i], eb[i])):
            return False
        if not _pair_matches((eq.c[i], eq.d[i]), (ec[i], ed[i])):
            return False
    return True


def forbidden_as_set(forbidden: semreg.ForbiddenSet, digits: int = 9) -> frozenset:
    assert not forbidden.all_forbidden
    return frozenset(tuple(round(float(v), digits) for v in m) for m in forbidden.members)


def audit_report(report: semreg.FitReport, hp: semreg.Hyperparameters, names=None) -> None:
    """Assert the monotonicity and node-budget invariants over a fit trace."""
    previous = None
    for row in report.trace:
        if previous is not None:
            assert row.mse < previous, f"trace not strictly decreasing at {row.iteration}"
            assert previous - row.mse > previous * hp.min_improvement, (
                f"step at iteration {row.iteration} below the improvement threshold"
            )
        previous = row.mse
        node = semreg.parse_expression(row.expression, names)
        count, _ = semreg.tree_metrics(node)
        if hp.max_nodes is not None:
            assert count <= hp.max_nodes, f"node budget exceeded at {row.iteration}"


def strip_timing(report_payload):
    """Normalize timing fields so deterministic payloads compare equal."""
    import copy
    import json

    payload = copy.deepcopy(report_payload)
    if isinstance(payload, str):
        payload = json.loads(payload)

    def scrub(obj):
        if isinstance(obj, dict):
            return {k: (0.0 if k in ("seconds", "mean_seconds") else scrub(v)) for k, v in obj.items()}
        if isinstance(obj, list):
            return [scrub(v) for v in obj]
        return obj

    return scrub(payload)
