"""Covering scores, γ sweeps and benchmark tables."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .graph_model import AffinityGraph, DepthLabeling
from .labeling import SolveError, solve_labeling
from .lp_formulation import ModelConfig, Variant

LITERAL = "literal"
JACCARD = "jaccard"


def _as_label_array(segments, node_areas, name):
    """Encode a list of disjoint node sets as one segment index per node (-1 = none)."""
    n = len(node_areas)
    out = np.full(n, -1, np.int64)
    for k, seg in enumerate(segments):
        idx = np.fromiter((int(i) for i in seg), np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise ValueError(f"{name} segment {k} names a node outside 0..{n - 1}")
        if np.unique(idx).size != idx.size or np.any(out[idx] >= 0):
            raise ValueError(f"{name} segments overlap (segment {k})")
        out[idx] = k
    return out


def _covering(truth, pred, areas, variant):
    """Covering from per-node segment indices (-1 = not in any segment)."""
    if variant not in (LITERAL, JACCARD):
        raise ValueError(f"unknown covering variant {variant!r}")
    areas = np.asarray(areas, float)
    nt, npred = int(truth.max(initial=-1)) + 1, int(pred.max(initial=-1)) + 1
    t_area = np.bincount(truth[truth >= 0], areas[truth >= 0], nt)
    total = t_area.sum()
    if nt == 0 or total <= 0:
        return 0.0
    if npred == 0:
        return 0.0
    p_area = np.bincount(pred[pred >= 0], areas[pred >= 0], npred)
    both = (truth >= 0) & (pred >= 0)
    inter = np.zeros((nt, npred))
    np.add.at(inter, (truth[both], pred[both]), areas[both])
    if variant == LITERAL:
        denom = t_area[:, None] + p_area[None, :]
    else:
        denom = t_area[:, None] + p_area[None, :] - inter
    ov = np.divide(inter, denom, out=np.zeros_like(inter), where=denom > 0)
    return float((t_area * ov.max(axis=1)).sum() / total)


def covering_score(truth_segments, predicted_segments, node_areas, variant: str = JACCARD) -> float:
    """Area-weighted best-overlap covering of the truth segments by the predicted ones.

    ``overlap`` is intersection over union for ``"jaccard"`` and
    ``|s ∩ s'| / (|s| + |s'|)`` for ``"literal"`` (bounded by 0.5).
    """
    truth = _as_label_array(truth_segments, node_areas, "truth")
    pred = _as_label_array(predicted_segments, node_areas, "predicted")
    return _covering(truth, pred, node_areas, variant)


def covering_maps(truth_map, predicted_map, variant: str = JACCARD) -> float:
    """Covering between two label images, one segment per distinct value."""
    t = np.asarray(truth_map)
    p = np.asarray(predicted_map)
    if t.shape != p.shape:
        raise ValueError(f"label maps differ in shape: {t.shape} vs {p.shape}")
    _, ti = np.unique(t.ravel(), return_inverse=True)
    _, pi = np.unique(p.ravel(), return_inverse=True)
    return _covering(ti.astype(np.int64), pi.astype(np.int64), np.ones(t.size), variant)


def segments_from_labels(labels) -> list:
    """Node sets, one per distinct value, ordered by value."""
    labels = np.asarray(labels)
    return [set(np.flatnonzero(labels == v).tolist()) for v in np.unique(labels)]


def predicted_segments(labeling: DepthLabeling) -> list:
    """Detachable objects plus the background component (object id 0)."""
    return segments_from_labels(labeling.object_map)


# -- gamma sweep -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SweepRow:
    gamma: float
    sigma_hat: int | None
    objective: float
    labeling: DepthLabeling | None
    status: str = "optimal"

    @property
    def ok(self) -> bool:
        return self.labeling is not None

    def to_json(self) -> dict:
        return {"gamma": self.gamma, "sigma": self.sigma_hat, "objective": self.objective,
                "status": self.status,
                "labels": None if self.labeling is None else self.labeling.rounded_labels.tolist()}


def gamma_sweep(graph: AffinityGraph, gammas, lam: float | None = None, method: str = "highs") -> list:
    """One MDL solve per γ (MDL_SOFT when ``lam`` is given).

    Non-optimal solves produce a row with ``labeling=None`` and the solver
    status; the sweep carries on.
    """
    g = [float(x) for x in gammas]
    if any(x <= 0 for x in g):
        raise ValueError("gammas must be positive")
    if any(b < a for a, b in zip(g, g[1:])):
        raise ValueError("gammas must be ascending")
    rows = []
    for gamma in g:
        if lam is None:
            cfg = ModelConfig(Variant.MDL, gamma=gamma)
        else:
            cfg = ModelConfig(Variant.MDL_SOFT, gamma=gamma, lam=lam)
        try:
            lab = solve_labeling(graph, cfg, method=method)
        except SolveError as e:
            rows.append(SweepRow(gamma, None, float("nan"), None, e.status))
            continue
        rows.append(SweepRow(gamma, lab.sigma_hat, lab.objective, lab))
    return rows


def sigma_non_increasing(rows) -> bool:
    s = [r.sigma_hat for r in rows if r.ok]
    return all(b <= a for a, b in zip(s, s[1:]))


def parse_grid(text: str) -> list:
    """``"a:b:step"`` to the inclusive list a, a+step, ..., b."""
    try:
        a, b, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise ValueError(f"grid must look like start:stop:step, got {text!r}") from None
    if step <= 0 or b < a:
        raise ValueError(f"grid {text!r} must have step > 0 and stop >= start")
    n = int(np.floor((b - a) / step + 1e-9)) + 1
    return [round(a + k * step, 12) for k in range(n)]


# -- benchmark table -------------------------------------------------------------

ROWS = (
    ("model_selection", "Score with model selection"),
    ("true_L", "Score with true L"),
    ("forced_L2", "Score when forcing L = 2"),
)


def _case_score(graph, truth, labeling, variant):
    truth = np.asarray(truth)
    if truth.ndim == 2:
        if graph.segmentation is None:
            raise ValueError("pixel truth needs a graph with a segmentation map")
        return covering_maps(truth, labeling.object_map[graph.segmentation], variant)
    return covering_score(segments_from_labels(truth), predicted_segments(labeling),
                          graph.areas, variant)


def benchmark_case(case: dict, variant: str = JACCARD) -> dict:
    """The three scores of one case.

    ``case`` holds ``graph``, ``truth`` (truth layer per node, or per pixel
    when the graph carries a segmentation) and ``config`` (the model-selection
    configuration); optional ``name`` and ``true_levels`` (defaults to the
    number of distinct truth layers).
    """
    graph, truth = case["graph"], np.asarray(case["truth"])
    cfg = case.get("config") or ModelConfig()
    true_L = int(case.get("true_levels") or max(2, np.unique(truth).size))
    soft = Variant(cfg.variant).has_slacks
    fixed = Variant.SOFT if soft else Variant.HARD
    configs = {
        "model_selection": cfg,
        "true_L": ModelConfig(fixed, levels=true_L, lam=cfg.lam),
        "forced_L2": ModelConfig(fixed, levels=2, lam=cfg.lam),
    }
    out = {"case": case.get("name", "")}
    for key, c in configs.items():
        try:
            out[key] = _case_score(graph, truth, solve_labeling(graph, c), variant)
        except SolveError:
            out[key] = None
    return out


def benchmark_report(cases, variant: str = JACCARD, fmt: str = "text"):
    """Per-case covering under model selection, the true L and L = 2.

    ``fmt="text"`` gives an aligned table with one column per case;
    ``fmt="json"`` a list with one object per case.
    """
    results = [benchmark_case(c, variant) for c in cases]
    if fmt == "json":
        return json.dumps(results, indent=2)
    if fmt != "text":
        raise ValueError(f"unknown format {fmt!r}")
    names = [r["case"] or f"case{k}" for k, r in enumerate(results)]
    head_w = max(len(label) for _, label in ROWS)
    widths = [max(6, len(n)) for n in names]
    lines = [" | ".join([" " * head_w] + [n.rjust(w) for n, w in zip(names, widths)])]
    for key, label in ROWS:
        cells = ["-" if r[key] is None else f"{r[key]:.2f}" for r in results]
        lines.append(" | ".join([label.ljust(head_w)] + [c.rjust(w) for c, w in zip(cells, widths)]))
    return "\n".join(lines)

