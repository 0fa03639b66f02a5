"""Region graph, seed constraints and depth labelings.

The graph is stored column-wise (numpy arrays per field) so that weight
computation and LP assembly stay vectorized; :class:`Node` and
:class:`Edge` are lightweight record views for inspection.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

FREE = 0
OCCLUDED = 1
OCCLUDER = 2

_KIND_NAMES = {FREE: "free", OCCLUDED: "occluded", OCCLUDER: "occluder"}
_KIND_CODES = {v: k for k, v in _KIND_NAMES.items()}


class RegionClass(NamedTuple):
    kind: int
    component: int = 0

    def __str__(self):
        if self.kind == FREE:
            return "free"
        return f"{_KIND_NAMES[self.kind]}:{self.component}"

    @classmethod
    def parse(cls, text: str) -> "RegionClass":
        if text == "free":
            return cls(FREE, 0)
        name, _, comp = text.partition(":")
        if name not in _KIND_CODES or not comp:
            raise ValueError(f"bad region class {text!r}")
        return cls(_KIND_CODES[name], int(comp))


class Node(NamedTuple):
    id: int
    centroid: tuple
    area: int
    mean_intensity: float
    mean_flow: tuple
    region_class: RegionClass


class Edge(NamedTuple):
    i: int
    j: int
    boundary_length: float
    pb_mean: float
    weight: float


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class SeedConstraintSet:
    """Ordered (occluded, occluder) node pairs grouped by occlusion component.

    ``components[k - 1]`` holds the pairs of component ``k``.
    """

    components: tuple = ()

    def __post_init__(self):
        comps = []
        for pairs in self.components:
            arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
            arr.flags.writeable = False
            comps.append(arr)
        object.__setattr__(self, "components", tuple(comps))

    @property
    def K(self) -> int:
        return len(self.components)

    @property
    def num_pairs(self) -> int:
        return int(sum(len(p) for p in self.components))

    def pairs(self):
        """Yield ``(k, i, j)`` with 1-based component index ``k``."""
        for k, arr in enumerate(self.components, start=1):
            for i, j in arr:
                yield k, int(i), int(j)

    def __eq__(self, other):
        if not isinstance(other, SeedConstraintSet) or self.K != other.K:
            return False
        return all(np.array_equal(a, b) for a, b in zip(self.components, other.components))

    def __hash__(self):
        return hash(tuple(tuple(map(tuple, a.tolist())) for a in self.components))


@dataclass(frozen=True, eq=False)
class AffinityGraph:
    """Weighted region graph with occlusion seeds.

    Node fields are arrays of length ``n``; edge fields arrays of length ``m``
    with ``edges[e] = (i, j)``, ``i < j``. ``segmentation`` optionally maps
    every pixel to its node id (needed for temporal warping and pixel-level
    scoring).
    """

    centroids: np.ndarray
    areas: np.ndarray
    intensity: np.ndarray
    flow: np.ndarray
    region_kind: np.ndarray
    region_component: np.ndarray
    edges: np.ndarray
    boundary_length: np.ndarray
    pb: np.ndarray
    weights: np.ndarray
    seeds: SeedConstraintSet = field(default_factory=SeedConstraintSet)
    segmentation: np.ndarray | None = None

    def __post_init__(self):
        n = len(np.asarray(self.areas))
        conv = {
            "centroids": (float, (n, 2)),
            "areas": (np.int64, (n,)),
            "intensity": (float, (n,)),
            "flow": (float, (n, 2)),
            "region_kind": (np.int8, (n,)),
            "region_component": (np.int64, (n,)),
        }
        for name, (dtype, shape) in conv.items():
            object.__setattr__(self, name, _frozen(np.reshape(getattr(self, name), shape), dtype))
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        m = len(edges)
        object.__setattr__(self, "edges", _frozen(edges, np.int64))
        for name in ("boundary_length", "pb", "weights"):
            object.__setattr__(self, name, _frozen(np.reshape(getattr(self, name), (m,)), float))
        if not isinstance(self.seeds, SeedConstraintSet):
            object.__setattr__(self, "seeds", SeedConstraintSet(tuple(self.seeds)))
        if self.segmentation is not None:
            object.__setattr__(self, "segmentation", _frozen(self.segmentation, np.int64))

    @property
    def num_nodes(self) -> int:
        return len(self.areas)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def nodes(self) -> list[Node]:
        return [self.node(i) for i in range(self.num_nodes)]

    def node(self, i: int) -> Node:
        return Node(
            i,
            tuple(self.centroids[i]),
            int(self.areas[i]),
            float(self.intensity[i]),
            tuple(self.flow[i]),
            RegionClass(int(self.region_kind[i]), int(self.region_component[i])),
        )

    def edge(self, e: int) -> Edge:
        i, j = self.edges[e]
        return Edge(int(i), int(j), float(self.boundary_length[e]),
                    float(self.pb[e]), float(self.weights[e]))

    @property
    def edge_list(self) -> list[Edge]:
        return [self.edge(e) for e in range(self.num_edges)]

    def edge_index(self) -> dict:
        """Map ``(min, max)`` endpoint pairs to edge positions."""
        return {(int(i), int(j)): e for e, (i, j) in enumerate(self.edges)}

    def replace(self, **changes) -> "AffinityGraph":
        kw = {f: getattr(self, f) for f in self.__dataclass_fields__}
        kw.update(changes)
        return AffinityGraph(**kw)

    def with_weights(self, weights) -> "AffinityGraph":
        return self.replace(weights=weights)

    def __eq__(self, other):
        if not isinstance(other, AffinityGraph):
            return NotImplemented
        for f in self.__dataclass_fields__:
            a, b = getattr(self, f), getattr(other, f)
            if f == "seeds":
                if a != b:
                    return False
            elif a is None or b is None:
                if a is not b:
                    return False
            elif a.shape != b.shape or not np.array_equal(a, b):
                return False
        return True

    __hash__ = None

    @classmethod
    def from_edges(
        cls,
        num_nodes: int,
        edges: Sequence[tuple[int, int]],
        weights: Sequence[float] | None = None,
        seeds: Sequence[Sequence[tuple[int, int]]] = (),
        **node_fields,
    ) -> "AffinityGraph":
        """Build a graph from bare topology, for tests and toy problems.

        Missing node features get neutral defaults and region classes are
        inferred from the seed pairs (first assignment wins).
        """
        n = num_nodes
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        e = np.sort(e, axis=1)
        m = len(e)
        kind = np.zeros(n, np.int8)
        comp = np.zeros(n, np.int64)
        for k, pairs in enumerate(seeds, start=1):
            for i, j in pairs:
                if kind[i] == FREE:
                    kind[i], comp[i] = OCCLUDED, k
                if kind[j] == FREE:
                    kind[j], comp[j] = OCCLUDER, k
        return cls(
            centroids=node_fields.get("centroids", np.zeros((n, 2))),
            areas=node_fields.get("areas", np.ones(n, np.int64)),
            intensity=node_fields.get("intensity", np.zeros(n)),
            flow=node_fields.get("flow", np.zeros((n, 2))),
            region_kind=kind,
            region_component=comp,
            edges=e,
            boundary_length=node_fields.get("boundary_length", np.ones(m)),
            pb=node_fields.get("pb", np.zeros(m)),
            weights=np.ones(m) if weights is None else weights,
            seeds=SeedConstraintSet(tuple(seeds)),
        )


@dataclass(frozen=True, eq=False)
class DepthLabeling:
    """Result of solving and rounding one frame.

    ``objective`` is the exact objective of the rounded labeling;
    ``lp_objective`` the relaxed optimum it came from.
    """

    real_labels: np.ndarray
    rounded_labels: np.ndarray
    sigma_hat: int
    component_slacks: np.ndarray
    object_map: np.ndarray
    objective: float
    lp_objective: float = float("nan")

    @property
    def num_objects(self) -> int:
        return int(self.object_map.max(initial=0))

    def to_json(self) -> dict:
        return {
            "labels": [int(v) for v in self.rounded_labels],
            "real_labels": [float(v) for v in self.real_labels],
            "sigma": int(self.sigma_hat),
            "objective": float(self.objective),
            "lp_objective": float(self.lp_objective),
            "slacks": [float(v) for v in self.component_slacks],
            "objects": [int(v) for v in self.object_map],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "DepthLabeling":
        labels = np.asarray(doc["labels"], dtype=np.int64)
        return cls(
            real_labels=np.asarray(doc.get("real_labels", labels), dtype=float),
            rounded_labels=labels,
            sigma_hat=int(doc["sigma"]),
            component_slacks=np.asarray(doc.get("slacks", []), dtype=float),
            object_map=np.asarray(doc.get("objects", np.zeros_like(labels)), dtype=np.int64),
            objective=float(doc.get("objective", float("nan"))),
            lp_objective=float(doc.get("lp_objective", float("nan"))),
        )


@dataclass
class ValidationReport:
    problems: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def add(self, msg: str):
        self.problems.append(msg)

    def warn(self, msg: str):
        self.warnings.append(msg)

    @property
    def ok(self) -> bool:
        return not self.problems

    def __bool__(self):
        return self.ok

    def __str__(self):
        return "valid" if self.ok else "\n".join(self.problems)


def validate(graph: AffinityGraph) -> ValidationReport:
    """Check every graph invariant and report all violations found."""
    rep = ValidationReport()
    n = graph.num_nodes
    for i in np.flatnonzero(graph.areas < 1):
        rep.add(f"node {i}: area {graph.areas[i]} < 1")
    bad_int = (graph.intensity < 0) | (graph.intensity > 1) | ~np.isfinite(graph.intensity)
    for i in np.flatnonzero(bad_int):
        rep.add(f"node {i}: mean_intensity {graph.intensity[i]} outside [0, 1]")
    for i in np.flatnonzero(~np.isfinite(graph.flow).all(axis=1)):
        rep.add(f"node {i}: non-finite mean_flow")
    for i in np.flatnonzero(~np.isin(graph.region_kind, (FREE, OCCLUDED, OCCLUDER))):
        rep.add(f"node {i}: unknown region class code {graph.region_kind[i]}")

    seen = set()
    for e, (i, j) in enumerate(graph.edges):
        i, j = int(i), int(j)
        if not (0 <= i < n and 0 <= j < n):
            rep.add(f"edge {e}: endpoint ({i}, {j}) out of range")
        if i == j:
            rep.add(f"edge {e}: self loop at node {i}")
        elif i > j:
            rep.add(f"edge {e}: endpoints ({i}, {j}) not ordered i < j")
        key = (min(i, j), max(i, j))
        if key in seen:
            rep.add(f"edge {e}: duplicate edge {key}")
        seen.add(key)
    for e in np.flatnonzero(~(graph.weights >= 0)):
        rep.add(f"edge {e}: weight {graph.weights[e]} is negative or NaN")
    for e in np.flatnonzero(~(graph.boundary_length >= 0)):
        rep.add(f"edge {e}: boundary_length {graph.boundary_length[e]} is negative")
    for e in np.flatnonzero(~((graph.pb >= 0) & (graph.pb <= 1))):
        rep.add(f"edge {e}: pb_mean {graph.pb[e]} outside [0, 1]")

    for k, i, j in graph.seeds.pairs():
        if not (0 <= i < n and 0 <= j < n):
            rep.add(f"seed component {k}: pair ({i}, {j}) out of range")
            continue
        if (min(i, j), max(i, j)) not in seen:
            rep.add(f"seed component {k}: pair ({i}, {j}) is not an edge")
        # a node shared by two components can carry only one class; the
        # ordering rows are still well defined, so this is not fatal
        if (graph.region_kind[i], graph.region_component[i]) != (OCCLUDED, k):
            rep.warn(f"seed component {k}: node {i} is {RegionClass(graph.region_kind[i], graph.region_component[i])}, expected occluded:{k}")
        if (graph.region_kind[j], graph.region_component[j]) != (OCCLUDER, k):
            rep.warn(f"seed component {k}: node {j} is {RegionClass(graph.region_kind[j], graph.region_component[j])}, expected occluder:{k}")

    if graph.segmentation is not None:
        seg = graph.segmentation
        if seg.size and (seg.min() < 0 or seg.max() >= n):
            rep.add("segmentation: node id out of range")
        elif seg.size:
            counts = np.bincount(seg.ravel(), minlength=n)
            for i in np.flatnonzero(counts != graph.areas):
                rep.add(f"node {i}: area {graph.areas[i]} != {counts[i]} segmentation pixels")
    return rep


# -- JSON file format -------------------------------------------------------

def graph_to_json(graph: AffinityGraph, include_weights: bool = False) -> dict:
    doc = {
        "nodes": [
            {
                "id": i,
                "centroid": [float(v) for v in graph.centroids[i]],
                "area": int(graph.areas[i]),
                "intensity": float(graph.intensity[i]),
                "flow": [float(v) for v in graph.flow[i]],
                "region": str(RegionClass(int(graph.region_kind[i]), int(graph.region_component[i]))),
            }
            for i in range(graph.num_nodes)
        ],
        "edges": [],
        "seeds": [
            {"component": k, "pairs": pairs.tolist()}
            for k, pairs in enumerate(graph.seeds.components, start=1)
        ],
    }
    for e, (i, j) in enumerate(graph.edges):
        rec = {"i": int(i), "j": int(j),
               "boundary_length": float(graph.boundary_length[e]),
               "pb": float(graph.pb[e])}
        if include_weights:
            rec["weight"] = float(graph.weights[e])
        doc["edges"].append(rec)
    if include_weights:
        doc["weights_precomputed"] = True
    if graph.segmentation is not None:
        h, w = graph.segmentation.shape
        doc["segmentation"] = {"width": w, "height": h,
                               "ids": graph.segmentation.ravel().tolist()}
    return doc


def graph_from_json(doc: dict, params=None) -> AffinityGraph:
    """Parse a graph document; weights are recomputed unless precomputed.

    ``params`` is an :class:`~depthlayers.affinity.AffinityParams` used when
    the document does not carry weights.
    """
    nodes = doc["nodes"]
    ids = [int(nd["id"]) for nd in nodes]
    # external ids may be sparse or unordered; map them to dense indices
    index = {ext: pos for pos, ext in enumerate(ids)}
    if len(index) != len(ids):
        raise ValueError("nodes: duplicate id")
    n = len(nodes)
    region = [RegionClass.parse(nd.get("region", "free")) for nd in nodes]
    seeds = []
    for rec in sorted(doc.get("seeds", []), key=lambda r: int(r["component"])):
        seeds.append([(index[int(a)], index[int(b)]) for a, b in rec["pairs"]])
    edges = doc.get("edges", [])
    pairs = np.array([(index[int(r["i"])], index[int(r["j"])]) for r in edges],
                     dtype=np.int64).reshape(-1, 2)
    pairs = np.sort(pairs, axis=1)

    # infer region classes from seeds when the file does not carry them
    kind = np.array([r.kind for r in region], np.int8)
    comp = np.array([r.component for r in region], np.int64)
    if not any("region" in nd for nd in nodes):
        for k, ps in enumerate(seeds, start=1):
            for i, j in ps:
                if kind[i] == FREE:
                    kind[i], comp[i] = OCCLUDED, k
                if kind[j] == FREE:
                    kind[j], comp[j] = OCCLUDER, k

    seg = None
    if "segmentation" in doc:
        s = doc["segmentation"]
        seg = np.array([index[int(v)] for v in s["ids"]], np.int64).reshape(s["height"], s["width"])

    graph = AffinityGraph(
        centroids=np.array([nd["centroid"] for nd in nodes], float).reshape(n, 2),
        areas=np.array([nd["area"] for nd in nodes], np.int64),
        intensity=np.array([nd["intensity"] for nd in nodes], float),
        flow=np.array([nd["flow"] for nd in nodes], float).reshape(n, 2),
        region_kind=kind,
        region_component=comp,
        edges=pairs,
        boundary_length=np.array([r.get("boundary_length", 1.0) for r in edges], float),
        pb=np.array([r.get("pb", 0.0) for r in edges], float),
        weights=np.array([r.get("weight", np.nan) for r in edges], float),
        seeds=SeedConstraintSet(tuple(seeds)),
        segmentation=seg,
    )
    if not doc.get("weights_precomputed", False):
        from .affinity import AffinityParams, compute_weights

        graph = compute_weights(graph, params or AffinityParams())
    return graph


def write_graph(graph: AffinityGraph, path, include_weights: bool = False):
    Path(path).write_text(json.dumps(graph_to_json(graph, include_weights)))


def read_graph(path, params=None) -> AffinityGraph:
    return graph_from_json(json.loads(Path(path).read_text()), params)

