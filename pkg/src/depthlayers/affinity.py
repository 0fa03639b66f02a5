"""Edge weights, occluder bands and seed-respecting superpixels."""

from __future__ import annotations

import heapq
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .graph_model import FREE, OCCLUDED, OCCLUDER, AffinityGraph, SeedConstraintSet

EIGHT = np.ones((3, 3), bool)


class BandClippedWarning(UserWarning):
    """The occluder band ran into the image border and was cut off."""


@dataclass(frozen=True)
class AffinityParams:
    alpha: float = 0.25
    beta: float = 0.5
    kappa: float = 0.25
    epsilon: float = 1.5

    def __post_init__(self):
        for name in ("alpha", "beta", "kappa"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be a finite non-negative number, got {v}")
        if not (self.epsilon > 0):
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")


def _check_finite(*values):
    for v in values:
        if not np.all(np.isfinite(v)):
            raise ValueError(f"non-finite input {v!r}")


def pixel_weight(intensity_a, intensity_b, flow_a, flow_b, distance, params=AffinityParams()):
    """Affinity of two pixels ``distance`` apart (zero outside the neighborhood)."""
    _check_finite(intensity_a, intensity_b, flow_a, flow_b, distance)
    if distance >= params.epsilon:
        return 0.0
    dv = np.subtract(flow_a, flow_b, dtype=float)
    return float(params.alpha * math.exp(-(intensity_a - intensity_b) ** 2)
                 + params.beta * math.exp(-float(dv @ dv)))


def superpixel_weight(boundary_length, mean_intensity_i, mean_intensity_j,
                      mean_flow_i, mean_flow_j, pb_mean=0.0, params=AffinityParams()):
    """Affinity of two adjacent superpixels sharing ``boundary_length`` pixels of border."""
    _check_finite(boundary_length, mean_intensity_i, mean_intensity_j, mean_flow_i, mean_flow_j, pb_mean)
    if boundary_length < 0:
        raise ValueError(f"boundary_length must be >= 0, got {boundary_length}")
    if not 0 <= pb_mean <= 1:
        raise ValueError(f"pb_mean must lie in [0, 1], got {pb_mean}")
    dv = np.subtract(mean_flow_i, mean_flow_j, dtype=float)
    return float(boundary_length * (
        params.alpha * math.exp(-(mean_intensity_i - mean_intensity_j) ** 2)
        + params.beta * math.exp(-float(dv @ dv))
        + params.kappa * (1.0 - pb_mean)))


def edge_weights(graph: AffinityGraph, params=AffinityParams()) -> np.ndarray:
    """Vectorized superpixel weights for every edge of ``graph``."""
    if graph.num_edges == 0:
        return np.zeros(0)
    i, j = graph.edges.T
    if np.any((graph.pb < 0) | (graph.pb > 1)):
        raise ValueError("pb_mean outside [0, 1]")
    dI = graph.intensity[i] - graph.intensity[j]
    dv = graph.flow[i] - graph.flow[j]
    return graph.boundary_length * (
        params.alpha * np.exp(-dI ** 2)
        + params.beta * np.exp(-np.sum(dv ** 2, axis=1))
        + params.kappa * (1.0 - graph.pb))


def compute_weights(graph: AffinityGraph, params=AffinityParams()) -> AffinityGraph:
    return graph.with_weights(edge_weights(graph, params))


# -- occlusion masks ----------------------------------------------------------

def occlusion_components(occluded_mask) -> tuple[np.ndarray, int]:
    """8-connected components of the occluded mask, numbered from 1 in raster order."""
    lab, k = ndimage.label(np.asarray(occluded_mask, bool), structure=EIGHT)
    return lab, int(k)


def median_strip_width(component_mask) -> int:
    """Median run length across the thinner axis of a strip-like mask."""
    runs = []
    for axis in (0, 1):
        m = np.moveaxis(np.asarray(component_mask, bool), axis, 0)
        d = np.diff(np.pad(m, ((0, 0), (1, 1))).astype(np.int8), axis=1)
        starts = np.nonzero(d == 1)
        ends = np.nonzero(d == -1)
        lens = ends[1] - starts[1]
        runs.append(float(np.median(lens)) if lens.size else 0.0)
    return int(round(min(r for r in runs if r > 0)))


def build_occluder_band(occluded_mask, band_width=None, flow=None, flow_tol=0.5):
    """Local complement of the occluded region on the far side of its boundary.

    Without ``flow`` the band is the plain dilation of the mask minus the
    mask. With a flow field, the occluded region is duplicated onto the side
    whose motion differs from it: a band pixel is kept only when its flow
    differs by more than ``flow_tol`` from the flow at its nearest occluded
    pixel. ``band_width=None`` uses each component's median strip width,
    clamped to [1, 5].
    """
    omega = np.asarray(occluded_mask, bool)
    if not omega.any():
        raise ValueError("occluded mask is empty")
    lab, K = occlusion_components(omega)
    if band_width is None:
        widths = np.array([0] + [
            min(5, max(1, median_strip_width(lab == k))) for k in range(1, K + 1)])
    else:
        if int(band_width) < 1:
            raise ValueError(f"band_width must be a positive integer, got {band_width}")
        widths = np.full(K + 1, int(band_width))
    pad = int(widths.max())

    padded = np.pad(omega, pad)
    dist, (iy, ix) = ndimage.distance_transform_edt(~padded, return_indices=True)
    nearest_comp = np.pad(lab, pad)[iy, ix]
    band = (~padded) & (dist <= widths[nearest_comp])
    inner = np.zeros_like(band)
    inner[pad:pad + omega.shape[0], pad:pad + omega.shape[1]] = True
    if np.any(band & ~inner):
        warnings.warn("occluder band clipped at the image border", BandClippedWarning, stacklevel=2)
    band = band[pad:pad + omega.shape[0], pad:pad + omega.shape[1]]
    if flow is not None:
        flow = np.asarray(flow, float)
        if flow.shape[:2] != omega.shape:
            raise ValueError("flow and mask shapes differ")
        ny = iy[pad:pad + omega.shape[0], pad:pad + omega.shape[1]] - pad
        nx = ix[pad:pad + omega.shape[0], pad:pad + omega.shape[1]] - pad
        rel = np.linalg.norm(flow - flow[ny, nx], axis=-1)
        band &= rel > flow_tol
    return band


def _occluder_components(occluded_lab, occluder):
    """Attribute every occluder pixel to its nearest occluded component."""
    if occluded_lab.max() == 0:
        return np.zeros_like(occluded_lab)
    _, (iy, ix) = ndimage.distance_transform_edt(occluded_lab == 0, return_indices=True)
    return np.where(occluder, occluded_lab[iy, ix], 0)


# -- superpixels ----------------------------------------------------------------

def _pixel_pairs(shape):
    """Index pairs of 4-adjacent pixels: (horizontal, vertical) as flat indices."""
    h, w = shape
    idx = np.arange(h * w).reshape(h, w)
    a = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()])
    b = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()])
    return a, b


def _equal_value_components(code, pa, pb):
    same = code.ravel()[pa] == code.ravel()[pb]
    n = code.size
    adj = coo_matrix((np.ones(same.sum()), (pa[same], pb[same])), shape=(n, n))
    _, lab = connected_components(adj, directed=False)
    return lab


def _raster_relabel(lab):
    """Renumber labels densely in order of first appearance."""
    flat = lab.ravel()
    _, first, inv = np.unique(flat, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[inv].reshape(lab.shape)


def superpixelize(intensity, flow, occluded_mask, occluder_mask, pb_map=None,
                  target_count=400, block_size=None, params=AffinityParams()):
    """Partition an image into mask-pure regions and build the affinity graph.

    Regular blocks are cut along the mask classes (and occlusion components)
    and then merged greedily, cheapest Ward cost first over intensity and
    flow, never across classes, until ``target_count`` regions remain.
    """
    I = np.asarray(intensity, float)
    V = np.asarray(flow, float)
    occ = np.asarray(occluded_mask, bool)
    ocr = np.asarray(occluder_mask, bool)
    h, w = I.shape
    if V.shape != (h, w, 2) or occ.shape != (h, w) or ocr.shape != (h, w):
        raise ValueError("intensity, flow and masks must share dimensions")
    if pb_map is not None:
        pb_map = np.asarray(pb_map, float)
        if pb_map.shape != (h, w):
            raise ValueError("pb_map must share the image dimensions")
    if np.any(occ & ocr):
        raise ValueError("occluded and occluder masks overlap")

    occ_lab, K = occlusion_components(occ)
    ocr_comp = _occluder_components(occ_lab, ocr)
    kind = np.where(occ, OCCLUDED, np.where(ocr_comp > 0, OCCLUDER, FREE)).astype(np.int64)
    comp = np.where(occ, occ_lab, ocr_comp)
    key = kind * (K + 1) + comp

    pa, pb_ = _pixel_pairs((h, w))
    pieces = np.unique(_equal_value_components(key, pa, pb_)).size
    if target_count < pieces:
        raise ValueError(f"target_count {target_count} is below the number of mask components ({pieces})")

    if block_size is None:
        block_size = max(1, int(math.sqrt(h * w / (4.0 * target_count))))
    yy, xx = np.mgrid[0:h, 0:w]
    nbx = -(-w // block_size)
    block = (yy // block_size) * nbx + (xx // block_size)
    atoms = _equal_value_components(block * (int(key.max()) + 1) + key, pa, pb_)
    atoms = _raster_relabel(atoms.reshape(h, w))
    regions = _ward_merge(atoms, key, I, V, pb_map, pa, pb_, target_count)
    seg = _raster_relabel(regions)
    return graph_from_segmentation(seg, I, V, kind, comp, K, pb_map, params)


def _ward_merge(atoms, key, I, V, pb_map, pa, pb_, target_count):
    n = int(atoms.max()) + 1
    flat = atoms.ravel()
    cnt = np.bincount(flat, minlength=n).astype(float)
    feats = np.stack([
        np.bincount(flat, I.ravel(), n),
        np.bincount(flat, V[..., 0].ravel(), n),
        np.bincount(flat, V[..., 1].ravel(), n),
    ], axis=1)
    akey = np.zeros(n, np.int64)
    akey[flat] = key.ravel()

    a, b = flat[pa], flat[pb_]
    cross = a != b
    a, b = np.minimum(a[cross], b[cross]), np.maximum(a[cross], b[cross])
    if pb_map is not None:
        pbv = 0.5 * (pb_map.ravel()[pa] + pb_map.ravel()[pb_])[cross]
    else:
        pbv = np.zeros(a.size)
    pair_code = a * n + b
    uniq, inv = np.unique(pair_code, return_inverse=True)
    blen = np.bincount(inv, minlength=uniq.size).astype(float)
    bpb = np.bincount(inv, pbv, minlength=uniq.size)
    nbrs = [dict() for _ in range(n)]
    for code, L, P in zip(uniq.tolist(), blen.tolist(), bpb.tolist()):
        u, v = divmod(code, n)
        nbrs[u][v] = [L, P]
        nbrs[v][u] = [L, P]

    parent = np.arange(n)
    version = [0] * n
    alive = n

    def cost(u, v):
        mu = feats[u] / cnt[u] - feats[v] / cnt[v]
        L, P = nbrs[u][v]
        return cnt[u] * cnt[v] / (cnt[u] + cnt[v]) * (float(mu @ mu) + P / L)

    heap = []
    for u in range(n):
        for v in nbrs[u]:
            if u < v and akey[u] == akey[v]:
                heap.append((cost(u, v), u, v, 0, 0))
    heapq.heapify(heap)
    while alive > target_count and heap:
        _, u, v, vu, vv = heapq.heappop(heap)
        if version[u] != vu or version[v] != vv or parent[u] != u or parent[v] != v:
            continue
        # absorb v into u (u < v keeps ids stable)
        parent[v] = u
        cnt[u] += cnt[v]
        feats[u] += feats[v]
        del nbrs[u][v]
        del nbrs[v][u]
        for c, (L, P) in nbrs[v].items():
            del nbrs[c][v]
            if c in nbrs[u]:
                nbrs[u][c][0] += L
                nbrs[u][c][1] += P
            else:
                nbrs[u][c] = [L, P]
            nbrs[c][u] = nbrs[u][c]
        nbrs[v] = {}
        version[u] += 1
        alive -= 1
        for c in nbrs[u]:
            if akey[c] == akey[u]:
                x, y = (u, c) if u < c else (c, u)
                heapq.heappush(heap, (cost(x, y), x, y, version[x], version[y]))

    # path-compress to roots
    root = parent.copy()
    while True:
        nxt = root[root]
        if np.array_equal(nxt, root):
            break
        root = nxt
    return root[atoms]


def graph_from_segmentation(seg, intensity, flow, kind, comp, K, pb_map=None,
                            params=AffinityParams()) -> AffinityGraph:
    """Region graph of a label image whose regions are pure in (kind, comp)."""
    h, w = seg.shape
    n = int(seg.max()) + 1
    flat = seg.ravel()
    area = np.bincount(flat, minlength=n)
    yy, xx = np.mgrid[0:h, 0:w]
    cx = np.bincount(flat, xx.ravel(), n) / area
    cy = np.bincount(flat, yy.ravel(), n) / area
    mean_i = np.clip(np.bincount(flat, intensity.ravel(), n) / area, 0.0, 1.0)
    mv = np.stack([np.bincount(flat, flow[..., 0].ravel(), n),
                   np.bincount(flat, flow[..., 1].ravel(), n)], axis=1) / area[:, None]
    rkind = np.zeros(n, np.int64)
    rcomp = np.zeros(n, np.int64)
    rkind[flat] = np.asarray(kind).ravel()
    rcomp[flat] = np.asarray(comp).ravel()

    pa, pb_ = _pixel_pairs((h, w))
    a, b = flat[pa], flat[pb_]
    cross = a != b
    lo, hi = np.minimum(a[cross], b[cross]), np.maximum(a[cross], b[cross])
    pbv = (0.5 * (pb_map.ravel()[pa] + pb_map.ravel()[pb_])[cross]
           if pb_map is not None else np.zeros(lo.size))
    uniq, inv = np.unique(lo * n + hi, return_inverse=True)
    blen = np.bincount(inv, minlength=uniq.size).astype(float)
    pbm = np.clip(np.bincount(inv, pbv, minlength=uniq.size) / np.maximum(blen, 1), 0.0, 1.0)
    edges = np.stack([uniq // n, uniq % n], axis=1)

    comps = [[] for _ in range(K)]
    for (i, j) in edges.tolist():
        for occluded, occluder in ((i, j), (j, i)):
            if (rkind[occluded] == OCCLUDED and rkind[occluder] == OCCLUDER
                    and rcomp[occluded] == rcomp[occluder]):
                comps[rcomp[occluded] - 1].append((occluded, occluder))
    comps = [sorted(c) for c in comps]

    graph = AffinityGraph(
        centroids=np.stack([cx, cy], axis=1), areas=area, intensity=mean_i, flow=mv,
        region_kind=rkind, region_component=rcomp, edges=edges,
        boundary_length=blen, pb=pbm, weights=np.zeros(len(edges)),
        seeds=SeedConstraintSet(tuple(comps)), segmentation=seg,
    )
    return graph.with_weights(edge_weights(graph, params))


def pixel_graph(intensity, flow, occluded_mask, occluder_mask, params=AffinityParams()):
    """One node per pixel, edges between pixels closer than ``params.epsilon``."""
    I = np.asarray(intensity, float)
    V = np.asarray(flow, float)
    h, w = I.shape
    occ = np.asarray(occluded_mask, bool)
    ocr = np.asarray(occluder_mask, bool)
    if np.any(occ & ocr):
        raise ValueError("occluded and occluder masks overlap")
    occ_lab, K = occlusion_components(occ)
    ocr_comp = _occluder_components(occ_lab, ocr)
    kind = np.where(occ, OCCLUDED, np.where(ocr_comp > 0, OCCLUDER, FREE))
    comp = np.where(occ, occ_lab, ocr_comp)

    r = int(math.ceil(params.epsilon))
    offsets = [(dy, dx) for dy in range(0, r + 1) for dx in range(-r, r + 1)
               if (dy > 0 or dx > 0) and math.hypot(dx, dy) < params.epsilon]
    idx = np.arange(h * w).reshape(h, w)
    ea, eb = [], []
    for dy, dx in offsets:
        x0, x1 = max(0, -dx), min(w, w - dx)
        src = idx[0:h - dy, x0:x1]
        dst = idx[dy:h, x0 + dx:x1 + dx]
        ea.append(src.ravel())
        eb.append(dst.ravel())
    ea = np.concatenate(ea) if ea else np.zeros(0, np.int64)
    eb = np.concatenate(eb) if eb else np.zeros(0, np.int64)
    lo, hi = np.minimum(ea, eb), np.maximum(ea, eb)
    order = np.lexsort((hi, lo))
    lo, hi = lo[order], hi[order]
    If, Vf = I.ravel(), V.reshape(-1, 2)
    dv = Vf[lo] - Vf[hi]
    wts = (params.alpha * np.exp(-(If[lo] - If[hi]) ** 2)
           + params.beta * np.exp(-np.sum(dv ** 2, axis=1)))

    kf, cf = kind.ravel(), comp.ravel()
    comps = [[] for _ in range(K)]
    for i, j in zip(lo.tolist(), hi.tolist()):
        for a, b in ((i, j), (j, i)):
            if kf[a] == OCCLUDED and kf[b] == OCCLUDER and cf[a] == cf[b]:
                comps[cf[a] - 1].append((a, b))
    yy, xx = np.mgrid[0:h, 0:w]
    return AffinityGraph(
        centroids=np.stack([xx.ravel(), yy.ravel()], axis=1).astype(float),
        areas=np.ones(h * w, np.int64), intensity=np.clip(If, 0, 1), flow=Vf,
        region_kind=kf, region_component=cf, edges=np.stack([lo, hi], axis=1),
        boundary_length=np.ones(lo.size), pb=np.zeros(lo.size), weights=wts,
        seeds=SeedConstraintSet(tuple(sorted(c) for c in comps)),
        segmentation=idx,
    )
