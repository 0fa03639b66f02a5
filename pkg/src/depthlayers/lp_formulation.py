"""Sparse LP instances for the depth-ordering model variants.

Variable layout is fixed: one label per node (by node id), one ``u`` per
edge (edge order), then ``sigma`` for the MDL variants, then one slack per
seed component. Rows are emitted as seed rows (component order), two
absolute-value rows per edge, then the ``c_i <= sigma`` rows.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph_model import AffinityGraph

LE, GE, EQ = "<=", ">=", "="
DEFAULT_LAMBDA = 100.0


class Variant(str, enum.Enum):
    HARD = "hard"
    MDL = "mdl"
    SOFT = "soft"
    MDL_SOFT = "mdl-soft"

    @property
    def has_sigma(self) -> bool:
        return self in (Variant.MDL, Variant.MDL_SOFT)

    @property
    def has_slacks(self) -> bool:
        return self in (Variant.SOFT, Variant.MDL_SOFT)


@dataclass(frozen=True)
class ModelConfig:
    """Model variant and its parameters.

    ``levels`` bounds the labels for HARD and SOFT; MDL variants leave labels
    bounded only by ``sigma``. MDL_SOFT (layer cost plus per-component slack)
    is an extension combining both penalties.

    ``lam`` defaults to 100: with boundary-length weights, dropping a seed
    component must cost more than cutting an object outline, or the soft
    variants discard all occlusion evidence.
    """

    variant: Variant = Variant.MDL_SOFT
    levels: int | None = None
    gamma: float = 0.1
    lam: float = DEFAULT_LAMBDA

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if not self.variant.has_sigma:
            if self.levels is None:
                raise ValueError(f"variant {self.variant.value} requires levels")
            if int(self.levels) < 2:
                raise ValueError(f"levels must be >= 2, got {self.levels}")
        if self.gamma < 0 or self.lam < 0:
            raise ValueError("gamma and lambda must be non-negative")


@dataclass(frozen=True, eq=False)
class LpProblem:
    """``min c.x`` subject to sparse rows ``A x (<=|>=|=) b`` and box bounds."""

    num_vars: int
    objective: np.ndarray
    A: sp.csr_matrix
    senses: tuple
    rhs: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    var_roles: tuple
    config: ModelConfig | None = None
    num_nodes: int = 0
    num_edges: int = 0

    @property
    def num_rows(self) -> int:
        return self.A.shape[0]

    def label_slice(self) -> slice:
        return slice(0, self.num_nodes)

    def aux_slice(self) -> slice:
        return slice(self.num_nodes, self.num_nodes + self.num_edges)

    @property
    def sigma_index(self) -> int | None:
        if self.config is None or not self.config.variant.has_sigma:
            return None
        return self.num_nodes + self.num_edges

    def slack_slice(self) -> slice:
        start = self.num_nodes + self.num_edges + (self.sigma_index is not None)
        if self.config is None or not self.config.variant.has_slacks:
            return slice(start, start)
        return slice(start, self.num_vars)

    def row_activity(self, x) -> np.ndarray:
        return self.A @ np.asarray(x, float)

    def violation(self, x) -> float:
        """Largest violation of any row or bound at ``x``."""
        x = np.asarray(x, float)
        act = self.row_activity(x)
        s = np.asarray(self.senses)
        viol = np.zeros(self.num_rows)
        viol[s == LE] = act[s == LE] - self.rhs[s == LE]
        viol[s == GE] = self.rhs[s == GE] - act[s == GE]
        viol[s == EQ] = np.abs(act[s == EQ] - self.rhs[s == EQ])
        bound = np.maximum(self.lo - x, x - self.hi)
        return float(max(viol.max(initial=0.0), bound.max(initial=0.0), 0.0))

    def fingerprint(self) -> bytes:
        """Deterministic byte serialization, for reproducibility checks."""
        A = self.A.tocsr()
        A.sort_indices()
        parts = [self.objective, A.data, A.indices, A.indptr, self.rhs, self.lo, self.hi]
        return b"|".join(np.ascontiguousarray(p).tobytes() for p in parts) + repr(
            (self.senses, self.var_roles)).encode()

    def to_mps(self) -> str:
        return to_mps(self)


def build(graph: AffinityGraph, config: ModelConfig) -> LpProblem:
    """Assemble the LP for ``config.variant`` on ``graph``."""
    n, m = graph.num_nodes, graph.num_edges
    if np.any(graph.weights < 0) or not np.all(np.isfinite(graph.weights)):
        raise ValueError("edge weights must be finite and non-negative")
    eidx = graph.edge_index()
    for k, i, j in graph.seeds.pairs():
        if (min(i, j), max(i, j)) not in eidx:
            raise ValueError(f"seed component {k}: pair ({i}, {j}) is not an edge")

    v = config.variant
    K = graph.seeds.K if v.has_slacks else 0
    sig = n + m if v.has_sigma else None
    slack0 = n + m + (1 if v.has_sigma else 0)
    nv = slack0 + K

    roles = [("label", i) for i in range(n)]
    roles += [("aux_u", int(a), int(b)) for a, b in graph.edges]
    if v.has_sigma:
        roles.append(("sigma",))
    roles += [("slack", k) for k in range(1, K + 1)]

    c = np.zeros(nv)
    c[n:n + m] = graph.weights
    if v.has_sigma:
        c[sig] = config.gamma
    c[slack0:] = config.lam

    rows, cols, vals, senses, rhs = [], [], [], [], []
    r = 0
    # seed rows: c_j - c_i (+ xi_k) >= 1
    for k, i, j in graph.seeds.pairs():
        rows += [r, r]
        cols += [j, i]
        vals += [1.0, -1.0]
        if v.has_slacks:
            rows.append(r)
            cols.append(slack0 + k - 1)
            vals.append(1.0)
        senses.append(GE)
        rhs.append(1.0)
        r += 1
    # |c_i - c_j| <= u_ij as two rows per edge
    if m:
        e = np.arange(m)
        a, b = graph.edges[:, 0], graph.edges[:, 1]
        r0 = r + 2 * e
        r1 = r0 + 1
        rows += np.concatenate([r0, r0, r0, r1, r1, r1]).tolist()
        cols += np.concatenate([a, b, n + e, b, a, n + e]).tolist()
        vals += ([1.0] * m + [-1.0] * m + [-1.0] * m) * 2
        senses += [LE] * (2 * m)
        rhs += [0.0] * (2 * m)
        r += 2 * m
    # c_i <= sigma
    if v.has_sigma:
        for i in range(n):
            rows += [r, r]
            cols += [i, sig]
            vals += [1.0, -1.0]
            senses.append(LE)
            rhs.append(0.0)
            r += 1

    A = sp.csr_matrix((vals, (rows, cols)), shape=(r, nv))
    A.sum_duplicates()
    A.sort_indices()

    lo = np.zeros(nv)
    hi = np.full(nv, np.inf)
    lo[:n] = 1.0
    hi[:n] = np.inf if v.has_sigma else float(config.levels)
    if v.has_sigma:
        lo[sig] = 1.0
    hi[slack0:] = 1.0
    return LpProblem(nv, c, A, tuple(senses), np.array(rhs, float), lo, hi,
                     tuple(roles), config, n, m)


def fix_labels(problem: LpProblem, labels) -> LpProblem:
    """Copy of ``problem`` with every label variable pinned to ``labels``."""
    lo, hi = problem.lo.copy(), problem.hi.copy()
    lab = np.asarray(labels, float)
    lo[problem.label_slice()] = lab
    hi[problem.label_slice()] = lab
    return LpProblem(problem.num_vars, problem.objective, problem.A, problem.senses,
                     problem.rhs, lo, hi, problem.var_roles, problem.config,
                     problem.num_nodes, problem.num_edges)


def _var_name(role) -> str:
    return {"label": "c", "aux_u": "u", "sigma": "sigma", "slack": "xi"}[role[0]] + "".join(
        f"_{x}" for x in role[1:])


def to_mps(problem: LpProblem) -> str:
    """Free-MPS text (minimization) for feeding the problem to an external solver."""
    out = io.StringIO()
    names = [_var_name(r) for r in problem.var_roles]
    out.write("NAME depthlayers\nROWS\n N obj\n")
    tag = {LE: "L", GE: "G", EQ: "E"}
    for r, s in enumerate(problem.senses):
        out.write(f" {tag[s]} r{r}\n")
    out.write("COLUMNS\n")
    A = problem.A.tocsc()
    for j in range(problem.num_vars):
        if problem.objective[j] != 0:
            out.write(f" {names[j]} obj {float(problem.objective[j])!r}\n")
        for p in range(A.indptr[j], A.indptr[j + 1]):
            out.write(f" {names[j]} r{A.indices[p]} {float(A.data[p])!r}\n")
    out.write("RHS\n")
    for r, b in enumerate(problem.rhs):
        if b != 0:
            out.write(f" rhs r{r} {float(b)!r}\n")
    out.write("BOUNDS\n")
    for j in range(problem.num_vars):
        lo, hi = problem.lo[j], problem.hi[j]
        if lo == hi:
            out.write(f" FX bnd {names[j]} {float(lo)!r}\n")
            continue
        if lo != 0:
            out.write(f" LO bnd {names[j]} {float(lo)!r}\n" if np.isfinite(lo) else f" MI bnd {names[j]}\n")
        if np.isfinite(hi):
            out.write(f" UP bnd {names[j]} {float(hi)!r}\n")
    out.write("ENDATA\n")
    return out.getvalue()
