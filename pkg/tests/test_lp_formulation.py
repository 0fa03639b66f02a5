import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import path3, random_graph
from depthlayers.graph_model import AffinityGraph
from depthlayers.lp_formulation import GE, LE, ModelConfig, Variant, build, fix_labels
from depthlayers.lp_solver import solve

HARD2 = ModelConfig(Variant.HARD, levels=2)


def test_config_requires_levels_for_bounded_variants():
    with pytest.raises(ValueError, match="levels"):
        ModelConfig(Variant.HARD)
    with pytest.raises(ValueError, match="levels"):
        ModelConfig(Variant.SOFT)
    with pytest.raises(ValueError):
        ModelConfig(Variant.HARD, levels=1)
    with pytest.raises(ValueError):
        ModelConfig(Variant.MDL, gamma=-1)
    assert ModelConfig(Variant.MDL).levels is None
    assert ModelConfig("mdl-soft").variant is Variant.MDL_SOFT


def test_hard_counts_on_path():
    p = build(path3(), HARD2)
    assert p.num_vars == 5
    assert p.senses.count(GE) == 1
    assert p.senses.count(LE) == 4
    assert p.lo[:3].tolist() == [1, 1, 1] and p.hi[:3].tolist() == [2, 2, 2]
    assert [r[0] for r in p.var_roles] == ["label"] * 3 + ["aux_u"] * 2
    # seed row: c_1 - c_0 >= 1
    assert p.A[0].toarray().ravel().tolist() == [-1, 1, 0, 0, 0]
    assert p.rhs[0] == 1


def test_mdl_counts_on_path():
    p = build(path3(), ModelConfig(Variant.MDL, gamma=0.4))
    assert p.num_vars == 6
    assert p.num_rows == 1 + 4 + 3
    assert p.var_roles[5] == ("sigma",)
    assert p.objective[5] == 0.4
    assert np.isinf(p.hi[:3]).all() and p.lo[5] == 1


def test_soft_counts_on_path():
    p = build(path3(), ModelConfig(Variant.SOFT, levels=2, lam=3.0))
    assert p.num_vars == 6
    assert p.var_roles[5] == ("slack", 1)
    assert p.A[0, 5] == 1.0
    assert p.objective[5] == 3.0
    assert (p.lo[5], p.hi[5]) == (0, 1)


def test_mdl_soft_has_sigma_and_slacks():
    p = build(path3(), ModelConfig(Variant.MDL_SOFT, gamma=0.1, lam=2.0))
    assert p.num_vars == 7
    assert p.sigma_index == 5
    assert p.slack_slice() == slice(6, 7)


@pytest.mark.parametrize("variant,levels,expected", [
    (Variant.HARD, 3, 0.0), (Variant.SOFT, 3, 0.0), (Variant.MDL, None, 0.3), (Variant.MDL_SOFT, None, 0.3),
])
def test_no_seeds_constant_optimum(variant, levels, expected):
    g = AffinityGraph.from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)], [1, 2, 3, 4])
    sol = solve(build(g, ModelConfig(variant, levels=levels, gamma=0.3)))
    assert sol.objective == pytest.approx(expected, abs=1e-9)
    labels = sol.values[:4]
    assert np.ptp(labels) == pytest.approx(0, abs=1e-9)


def test_seed_off_edge_rejected():
    g = AffinityGraph.from_edges(3, [(0, 1), (1, 2)], seeds=[[(0, 2)]])
    with pytest.raises(ValueError, match="not an edge"):
        build(g, HARD2)


def test_negative_weights_rejected():
    g = AffinityGraph.from_edges(2, [(0, 1)], [-1.0])
    with pytest.raises(ValueError):
        build(g, HARD2)


def test_construction_is_byte_identical():
    g = random_graph(np.random.default_rng(3))
    cfg = ModelConfig(Variant.MDL_SOFT, gamma=0.2, lam=1.5)
    assert build(g, cfg).fingerprint() == build(g, cfg).fingerprint()


def test_objective_coefficients_non_negative():
    g = random_graph(np.random.default_rng(4))
    for v, L in ((Variant.HARD, 3), (Variant.MDL, None), (Variant.SOFT, 3), (Variant.MDL_SOFT, None)):
        assert (build(g, ModelConfig(v, levels=L)).objective >= 0).all()


def test_soft_with_zero_slacks_equals_hard():
    g = random_graph(np.random.default_rng(7), max_components=2, max_pairs=3)
    hard = build(g, ModelConfig(Variant.HARD, levels=3))
    soft = build(g, ModelConfig(Variant.SOFT, levels=3))
    n_h = hard.num_vars
    # dropping the slack columns (slacks fixed at 0) leaves the HARD rows
    assert (soft.A[:, :n_h] != hard.A).nnz == 0
    assert soft.senses == hard.senses
    np.testing.assert_array_equal(soft.rhs, hard.rhs)
    np.testing.assert_array_equal(soft.lo[:n_h], hard.lo)
    np.testing.assert_array_equal(soft.hi[:n_h], hard.hi)


def _substitute(problem, graph, labels):
    """Fill u, sigma and slacks with their smallest feasible values."""
    x = np.zeros(problem.num_vars)
    n = graph.num_nodes
    x[:n] = labels
    a, b = graph.edges[:, 0], graph.edges[:, 1]
    x[problem.aux_slice()] = np.abs(x[a] - x[b])
    if problem.sigma_index is not None:
        x[problem.sigma_index] = max(labels)
    sl = problem.slack_slice()
    for k, pairs in enumerate(graph.seeds.components):
        if sl.stop > sl.start:
            need = max([1 - (labels[j] - labels[i]) for i, j in pairs.tolist()], default=0)
            x[sl.start + k] = min(1, max(0, need))
    return x


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_integer_substitution_matches_model_objective(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng)
    labels = rng.integers(1, 4, size=g.num_nodes)
    for v in Variant:
        cfg = ModelConfig(v, levels=3, gamma=0.3, lam=0.7)
        p = build(g, cfg)
        x = _substitute(p, g, labels)
        a, b = g.edges[:, 0], g.edges[:, 1]
        expected = float(g.weights @ np.abs(labels[a] - labels[b]))
        if v.has_sigma:
            expected += 0.3 * labels.max()
        if v.has_slacks:
            expected += 0.7 * x[p.slack_slice()].sum()
        assert p.objective @ x == pytest.approx(expected)
        # minimal auxiliaries are feasible whenever the labels satisfy the seeds
        if p.violation(x) > 1e-9:
            gaps = [labels[j] - labels[i] for _, i, j in g.seeds.pairs()]
            assert min(gaps) < (0 if v.has_slacks else 1)


def test_fix_labels_pins_only_labels():
    p = build(path3(), HARD2)
    q = fix_labels(p, [1, 2, 2])
    assert q.lo[:3].tolist() == [1, 2, 2] and q.hi[:3].tolist() == [1, 2, 2]
    np.testing.assert_array_equal(q.lo[3:], p.lo[3:])
    sol = solve(q)
    assert sol.objective == pytest.approx(1.0)


def test_mps_export():
    text = build(path3(), ModelConfig(Variant.SOFT, levels=2)).to_mps()
    assert text.startswith("NAME") and text.rstrip().endswith("ENDATA")
    assert " G r0" in text
    assert "xi_1 r0 1.0" in text
    assert "UP bnd c_0 2.0" in text
