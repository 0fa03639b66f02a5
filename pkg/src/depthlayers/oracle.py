"""Exhaustive integer optimum for tiny graphs.

Used as ground truth for the LP relaxation and the rounding schemes, so it
shares no code with them: objectives are evaluated directly on integer
labelings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph_model import AffinityGraph
from .lp_formulation import ModelConfig, Variant

MAX_NODES = 12
MAX_LABEL = 4
TIE_TOL = 1e-9


@dataclass(frozen=True)
class OracleResult:
    best_labelings: list
    best_objective: float
    label_range: int


def labeling_objective(graph: AffinityGraph, labels, config: ModelConfig):
    """Exact objective of an integer labeling.

    Returns ``(objective, feasible, slacks)``; infeasible labelings get an
    infinite objective. Slacks are the smallest per-component values that
    satisfy every seed row, and a seed pair whose occluder sits strictly
    below its occluded node cannot be repaired by any slack.
    """
    c = [int(v) for v in labels]
    v = Variant(config.variant)
    total = 0.0
    for (i, j), w in zip(graph.edges.tolist(), graph.weights.tolist()):
        total += w * abs(c[i] - c[j])
    if v.has_sigma:
        total += config.gamma * max(c, default=1)
    elif c and max(c) > config.levels:
        return float("inf"), False, []
    if c and min(c) < 1:
        return float("inf"), False, []
    slacks = []
    for pairs in graph.seeds.components:
        need = 0.0
        for i, j in pairs.tolist():
            gap = c[j] - c[i]
            if v.has_slacks:
                if gap < 0:
                    return float("inf"), False, []
                need = max(need, 1.0 - gap)
            elif gap < 1:
                return float("inf"), False, []
        if v.has_slacks:
            slacks.append(min(1.0, max(0.0, need)))
    total += config.lam * sum(slacks)
    return total, True, slacks


def enumerate_optimum(graph: AffinityGraph, config: ModelConfig, max_label: int | None = None,
                      chunk: int = 1 << 16) -> OracleResult:
    """Minimize the integer objective over every labeling in {1..M}^n.

    ``M`` is ``max_label``, additionally capped by ``config.levels`` for the
    HARD and SOFT variants (default: levels, or 4 for the MDL variants).
    """
    n = graph.num_nodes
    v = Variant(config.variant)
    if max_label is None:
        max_label = MAX_LABEL if v.has_sigma else config.levels
    M = int(max_label) if v.has_sigma else min(int(max_label), int(config.levels))
    if n > MAX_NODES or M > MAX_LABEL:
        raise ValueError(f"enumeration bound exceeded: n={n} (max {MAX_NODES}), "
                         f"max_label={M} (max {MAX_LABEL})")
    if M < 1:
        raise ValueError("max_label must be >= 1")
    if n == 0:
        base = config.gamma if v.has_sigma else 0.0
        return OracleResult([()], base, M)

    a, b = graph.edges[:, 0], graph.edges[:, 1]
    w = graph.weights
    seed_pairs = [np.asarray(p).reshape(-1, 2) for p in graph.seeds.components]
    powers = M ** np.arange(n - 1, -1, -1, dtype=np.int64)
    total = M ** n

    best = np.inf
    best_rows = []
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        lab = (idx[:, None] // powers) % M + 1
        obj = np.abs(lab[:, a] - lab[:, b]) @ w if len(w) else np.zeros(len(idx))
        if v.has_sigma:
            obj = obj + config.gamma * lab.max(axis=1)
        ok = np.ones(len(idx), bool)
        for pairs in seed_pairs:
            if not len(pairs):
                continue
            gap = lab[:, pairs[:, 1]] - lab[:, pairs[:, 0]]
            if v.has_slacks:
                ok &= (gap >= 0).all(axis=1)
                xi = np.clip(1.0 - gap.min(axis=1), 0.0, 1.0)
                obj = obj + config.lam * xi
            else:
                ok &= (gap >= 1).all(axis=1)
        obj = np.where(ok, obj, np.inf)
        m = obj.min()
        if m < best - TIE_TOL:
            best = m
            best_rows = []
        if np.isfinite(m) and m <= best + TIE_TOL:
            sel = np.flatnonzero(obj <= best + TIE_TOL)
            best_rows.extend(tuple(int(x) for x in row) for row in lab[sel])
    return OracleResult(best_rows, float(best), M)
