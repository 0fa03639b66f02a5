"""Carry the previous frame's layers into the current frame's affinities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph_model import AffinityGraph, DepthLabeling


@dataclass(frozen=True)
class TemporalParams:
    tau: float = 2.0

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")


def h_indicator(a, b) -> int:
    """1 when both labels name the same non-background layer."""
    return int(a == b and a > 1 and b > 1)


def warp_labels(prev_labeling: DepthLabeling, prev_graph: AffinityGraph, backward_flow,
                current_graph: AffinityGraph) -> np.ndarray:
    """Previous-frame layer of each current node, by pixel majority vote.

    Every pixel ``x`` of the current frame looks up the previous labeling at
    ``x + backward_flow(x)`` (rounded to the nearest pixel); pixels landing
    outside the frame vote for the background. Ties go to the smaller label.
    """
    if backward_flow is None:
        raise ValueError("backward flow is required")
    seg = current_graph.segmentation
    prev_seg = prev_graph.segmentation
    if seg is None or prev_seg is None:
        raise ValueError("both graphs need a segmentation map")
    flow = np.asarray(backward_flow, float)
    h, w = seg.shape
    if flow.shape != (h, w, 2):
        raise ValueError(f"backward flow shape {flow.shape} does not cover the {h}x{w} frame")
    yy, xx = np.mgrid[0:h, 0:w]
    tx = np.rint(xx + flow[..., 0]).astype(np.int64)
    ty = np.rint(yy + flow[..., 1]).astype(np.int64)
    ph, pw = prev_seg.shape
    inside = (tx >= 0) & (tx < pw) & (ty >= 0) & (ty < ph)
    votes = np.ones((h, w), np.int64)
    prev_labels = np.asarray(prev_labeling.rounded_labels, np.int64)
    votes[inside] = prev_labels[prev_seg[ty[inside], tx[inside]]]

    n = current_graph.num_nodes
    L = int(votes.max()) + 1
    counts = np.bincount(seg.ravel() * L + votes.ravel(), minlength=n * L).reshape(n, L)
    counts[:, 0] = -1
    return counts.argmax(axis=1).astype(np.int64)


def augment_weights(graph: AffinityGraph, warped_labels, params: TemporalParams = TemporalParams()) -> AffinityGraph:
    """Add ``boundary_length / tau`` to every edge whose endpoints share a warped object layer."""
    lab = np.asarray(warped_labels, np.int64)
    if lab.shape != (graph.num_nodes,):
        raise ValueError("warped labels must cover every node")
    if graph.num_edges == 0:
        return graph
    a, b = graph.edges[:, 0], graph.edges[:, 1]
    h = (lab[a] == lab[b]) & (lab[a] > 1)
    return graph.with_weights(graph.weights + h * graph.boundary_length / params.tau)
