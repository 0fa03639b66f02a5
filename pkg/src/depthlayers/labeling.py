"""From LP solutions to integer depth layers and detachable objects."""

from __future__ import annotations

import json
import warnings
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .graph_model import AffinityGraph, DepthLabeling
from .lp_formulation import ModelConfig, Variant, build
from .lp_solver import OPTIMAL, LpSolution, solve
from .oracle import labeling_objective

SNAP = 1e-6


class SolveError(RuntimeError):
    """The LP did not reach an optimum (infeasible seeds, iteration limit, ...)."""

    def __init__(self, status, msg=None):
        super().__init__(msg or f"LP solve ended with status {status}")
        self.status = status


def _layout(graph: AffinityGraph, config: ModelConfig):
    n, m = graph.num_nodes, graph.num_edges
    v = Variant(config.variant)
    start = n + m + (1 if v.has_sigma else 0)
    stop = start + (graph.seeds.K if v.has_slacks else 0)
    return slice(0, n), slice(start, stop)


def round_half_down(x) -> np.ndarray:
    """Nearest integer, exact halves going to the smaller neighbour."""
    x = np.asarray(x, float)
    near = np.rint(x)
    x = np.where(np.abs(x - near) <= SNAP, near, x)
    return np.ceil(x - 0.5 - 1e-9).astype(np.int64)


def compact(labels) -> np.ndarray:
    """Map labels onto 1..L' keeping their order and dropping empty layers."""
    labels = np.asarray(labels, np.int64)
    if labels.size == 0:
        return labels
    _, inv = np.unique(labels, return_inverse=True)
    return inv.reshape(labels.shape).astype(np.int64) + 1


def ground(labels, graph: AffinityGraph) -> np.ndarray:
    """Shift each part of the graph (joined by edges or seed pairs) down to start at 1.

    The objective only sees label differences inside a part, so the shift
    never costs anything, and it picks one representative among optima that
    differ by a constant offset on some part.
    """
    labels = np.asarray(labels, np.int64).copy()
    n = labels.size
    if n == 0:
        return labels
    links = [graph.edges] + [np.asarray(p, np.int64).reshape(-1, 2) for p in graph.seeds.components]
    ab = np.concatenate(links)
    adj = sp.coo_matrix((np.ones(len(ab)), (ab[:, 0], ab[:, 1])), shape=(n, n))
    _, part = connected_components(adj, directed=False)
    low = np.full(part.max() + 1, np.iinfo(np.int64).max)
    np.minimum.at(low, part, labels)
    return labels - low[part] + 1


def extract_objects(labeling_or_labels, graph: AffinityGraph) -> np.ndarray:
    """Object id per node: 0 for layer 1, otherwise one id per connected same-layer group."""
    labels = getattr(labeling_or_labels, "rounded_labels", labeling_or_labels)
    labels = np.asarray(labels, np.int64)
    n = labels.size
    obj = np.zeros(n, np.int64)
    if n == 0:
        return obj
    a, b = graph.edges[:, 0], graph.edges[:, 1]
    keep = (labels[a] == labels[b]) & (labels[a] > 1)
    adj = sp.coo_matrix((np.ones(keep.sum()), (a[keep], b[keep])), shape=(n, n))
    _, comp = connected_components(adj, directed=False)
    fg = np.flatnonzero(labels > 1)
    # ids follow the lowest node id of each component
    _, first = np.unique(comp[fg], return_index=True)
    order = {c: k + 1 for k, c in enumerate(comp[fg][np.sort(first)])}
    for i in fg:
        obj[i] = order[comp[i]]
    return obj


def _make_labeling(graph, config, real, rounded, slacks, lp_objective):
    objective, feasible, _ = labeling_objective(graph, rounded, config)
    return DepthLabeling(
        real_labels=np.asarray(real, float),
        rounded_labels=rounded,
        sigma_hat=int(rounded.max(initial=0)),
        component_slacks=np.asarray(slacks, float),
        object_map=extract_objects(rounded, graph),
        objective=objective,
        lp_objective=float(lp_objective),
    )


def round_and_compact(solution: LpSolution, graph: AffinityGraph, config: ModelConfig) -> DepthLabeling:
    if solution.status != OPTIMAL:
        raise ValueError(f"cannot round a solution with status {solution.status}")
    lab_sl, slack_sl = _layout(graph, config)
    real = solution.values[lab_sl]
    rounded = compact(ground(round_half_down(real), graph))
    return _make_labeling(graph, config, real, rounded, solution.values[slack_sl], solution.objective)


def threshold_round(solution: LpSolution, graph: AffinityGraph, config: ModelConfig) -> DepthLabeling:
    """Best seed-feasible binarization of a two-level HARD solution.

    Every cut between consecutive distinct label values is tried; by the
    coarea property the cheapest one is an integer optimum.
    """
    if config.variant != Variant.HARD or config.levels != 2:
        raise ValueError("threshold_round needs the HARD variant with levels=2")
    if solution.status != OPTIMAL:
        raise ValueError(f"cannot round a solution with status {solution.status}")
    lab_sl, _ = _layout(graph, config)
    real = solution.values[lab_sl]
    vals = np.unique(real)
    thetas = list((vals[:-1] + vals[1:]) / 2) + [np.inf]
    best, best_obj = None, np.inf
    for theta in thetas:
        cand = np.where(real > theta, 2, 1).astype(np.int64)
        obj, feasible, _ = labeling_objective(graph, cand, config)
        if feasible and obj < best_obj - 1e-12:
            best, best_obj = cand, obj
    if best is None:
        warnings.warn("no seed-feasible threshold; falling back to nearest rounding", stacklevel=2)
        return round_and_compact(solution, graph, config)
    return _make_labeling(graph, config, real, compact(ground(best, graph)), [], solution.objective)


def slack_report(labeling: DepthLabeling) -> dict:
    """Occlusion components whose ordering evidence the solver discounted."""
    xi = np.asarray(labeling.component_slacks, float)
    return {
        "rejected": [int(k) + 1 for k in np.flatnonzero(xi > 0.5)],
        "weakened": [int(k) + 1 for k in np.flatnonzero((xi > 0) & (xi <= 0.5))],
    }


def solve_labeling(graph: AffinityGraph, config: ModelConfig, method: str = "highs",
                   rounding: str = "nearest") -> DepthLabeling:
    """Build, solve and round in one call; raises SolveError if not optimal."""
    sol = solve(build(graph, config), method=method)
    if sol.status != OPTIMAL:
        raise SolveError(sol.status)
    if rounding == "threshold":
        return threshold_round(sol, graph, config)
    return round_and_compact(sol, graph, config)


def layer_image(labeling: DepthLabeling, graph: AffinityGraph) -> np.ndarray:
    """Per-pixel layer map scaled to [0, 1] (farthest black, nearest white)."""
    if graph.segmentation is None:
        raise ValueError("graph has no segmentation map")
    lab = labeling.rounded_labels[graph.segmentation]
    top = max(labeling.sigma_hat - 1, 1)
    return (lab - 1) / top


def object_image(labeling: DepthLabeling, graph: AffinityGraph) -> np.ndarray:
    if graph.segmentation is None:
        raise ValueError("graph has no segmentation map")
    return labeling.object_map[graph.segmentation]


def write_labeling(labeling: DepthLabeling, path):
    Path(path).write_text(json.dumps(labeling.to_json()))


def read_labeling(path) -> DepthLabeling:
    return DepthLabeling.from_json(json.loads(Path(path).read_text()))
