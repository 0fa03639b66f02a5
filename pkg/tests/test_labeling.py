import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import path3, random_graph
from depthlayers.graph_model import AffinityGraph, DepthLabeling
from depthlayers.labeling import (
    SolveError, compact, extract_objects, ground, layer_image, read_labeling, round_and_compact,
    round_half_down, slack_report, solve_labeling, threshold_round, write_labeling,
)
from depthlayers.lp_formulation import ModelConfig, Variant, build
from depthlayers.lp_solver import INFEASIBLE, OPTIMAL, LpSolution, solve
from depthlayers.oracle import labeling_objective

HARD2 = ModelConfig(Variant.HARD, levels=2)


def fake_solution(graph, config, labels, slacks=()):
    p = build(graph, config)
    x = np.zeros(p.num_vars)
    x[:graph.num_nodes] = labels
    a, b = graph.edges[:, 0], graph.edges[:, 1]
    x[p.aux_slice()] = np.abs(x[a] - x[b])
    if p.sigma_index is not None:
        x[p.sigma_index] = max(labels)
    sl = p.slack_slice()
    x[sl] = slacks
    return LpSolution(OPTIMAL, x, float(p.objective @ x), 0, 0.0)


@pytest.mark.parametrize("real,expected", [
    ([1.0, 2.0, 2.0], [1, 2, 2]),
    ([1.49, 1.51], [1, 2]),
    ([1.5, 2.5, 3.5], [1, 2, 3]),
    ([2.0000004, 0.9999999], [2, 1]),
])
def test_round_half_down(real, expected):
    assert round_half_down(real).tolist() == expected


def test_round_and_compact_removes_empty_layer():
    g = path3()
    cfg = ModelConfig(Variant.HARD, levels=3)
    lab = round_and_compact(fake_solution(g, cfg, [1.0, 2.6, 2.6]), g, cfg)
    assert lab.rounded_labels.tolist() == [1, 2, 2]
    assert lab.sigma_hat == 2
    assert lab.real_labels.tolist() == [1.0, 2.6, 2.6]


def test_round_and_compact_copies_slacks():
    g = path3()
    cfg = ModelConfig(Variant.SOFT, levels=2)
    lab = round_and_compact(fake_solution(g, cfg, [1.0, 1.0, 1.0], [1.0]), g, cfg)
    assert lab.component_slacks.tolist() == [1.0]
    assert lab.objective == pytest.approx(cfg.lam)


def test_round_and_compact_rejects_non_optimal():
    g = path3()
    bad = LpSolution(INFEASIBLE, np.full(5, np.nan), np.nan, 0, np.inf)
    with pytest.raises(ValueError):
        round_and_compact(bad, g, HARD2)


@settings(max_examples=200)
@given(st.lists(st.integers(-5, 9), min_size=1, max_size=20))
def test_compaction_preserves_order(labels):
    out = compact(labels)
    assert sorted(set(out.tolist())) == list(range(1, len(set(labels)) + 1))
    for a, b, x, y in zip(labels, labels[1:], out, out[1:]):
        assert (a < b) == (x < y) and (a == b) == (x == y)


def test_objects_on_paths():
    g = path3()
    assert extract_objects(np.array([1, 2, 2]), g).tolist() == [0, 1, 1]
    g4 = AffinityGraph.from_edges(4, [(0, 1), (1, 2), (2, 3)])
    obj = extract_objects(np.array([2, 1, 1, 2]), g4)
    assert obj[1] == obj[2] == 0
    assert obj[0] != obj[3] and min(obj[0], obj[3]) >= 1
    assert extract_objects(np.ones(4, int), g4).max() == 0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_objects_partition_property(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng)
    labels = rng.integers(1, 4, size=g.num_nodes)
    obj = extract_objects(labels, g)
    assert ((obj == 0) == (labels == 1)).all()
    for o in range(1, obj.max() + 1):
        members = np.flatnonzero(obj == o)
        assert members.size and len(set(labels[members])) == 1
    for i, j in g.edges.tolist():
        if labels[i] == labels[j] > 1:
            assert obj[i] == obj[j]


def test_threshold_round_integral_is_unchanged():
    g = path3()
    sol = fake_solution(g, HARD2, [1.0, 2.0, 2.0])
    lab = threshold_round(sol, g, HARD2)
    assert lab.rounded_labels.tolist() == [1, 2, 2]
    assert lab.objective == pytest.approx(1.0)


def test_threshold_round_fractional_picks_cheapest_cut():
    g = AffinityGraph.from_edges(3, [(0, 1), (1, 2), (0, 2)], [1.0, 3.0, 1.0], [[(0, 2)]])
    lab = threshold_round(fake_solution(g, HARD2, [1.0, 1.5, 2.0]), g, HARD2)
    # (1,2,2) cuts edges 0-1 and 0-2 (cost 2); (1,1,2) cuts 1-2 and 0-2 (cost 4)
    assert lab.rounded_labels.tolist() == [1, 2, 2]
    assert lab.objective == pytest.approx(2.0)
    g2 = g.with_weights([3.0, 1.0, 1.0])
    lab2 = threshold_round(fake_solution(g2, HARD2, [1.0, 1.5, 2.0]), g2, HARD2)
    assert lab2.rounded_labels.tolist() == [1, 1, 2]


def test_threshold_round_fallback_warns():
    g = AffinityGraph.from_edges(2, [(0, 1)], [1.0], [[(0, 1)]])
    with pytest.warns(UserWarning, match="falling back"):
        lab = threshold_round(fake_solution(g, HARD2, [2.0, 1.0]), g, HARD2)
    assert lab.rounded_labels.tolist() == [2, 1]


def test_threshold_round_requires_two_level_hard():
    g = path3()
    with pytest.raises(ValueError):
        threshold_round(fake_solution(g, HARD2, [1, 2, 2]), g, ModelConfig(Variant.HARD, levels=3))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_threshold_never_worse_than_nearest(seed):
    g = random_graph(np.random.default_rng(seed))
    sol = solve(build(g, HARD2))
    if sol.status != OPTIMAL:
        return
    near = round_and_compact(sol, g, HARD2)
    thr = threshold_round(sol, g, HARD2)
    assert thr.objective <= near.objective + 1e-9


@pytest.mark.parametrize("xi,rejected,weakened", [
    ([0.0, 1.0], [2], []), ([0.2], [], [1]), ([], [], []), ([0.5, 0.51], [2], [1]),
])
def test_slack_report(xi, rejected, weakened):
    lab = DepthLabeling(np.ones(1), np.ones(1, int), 1, np.array(xi, float), np.zeros(1, int), 0.0)
    assert slack_report(lab) == {"rejected": rejected, "weakened": weakened}


def test_solve_labeling_path_and_errors():
    lab = solve_labeling(path3(), HARD2)
    assert lab.rounded_labels.tolist() == [1, 2, 2]
    assert lab.objective == pytest.approx(1.0) and lab.lp_objective == pytest.approx(1.0)
    assert lab.num_objects == 1
    g = AffinityGraph.from_edges(2, [(0, 1)], [1.0], [[(0, 1)], [(1, 0)]])
    with pytest.raises(SolveError) as e:
        solve_labeling(g, HARD2)
    assert e.value.status == INFEASIBLE


def test_objective_matches_oracle_evaluation():
    g = random_graph(np.random.default_rng(9))
    cfg = ModelConfig(Variant.MDL_SOFT, gamma=0.2, lam=0.6)
    lab = solve_labeling(g, cfg)
    assert lab.objective == pytest.approx(labeling_objective(g, lab.rounded_labels, cfg)[0])


def test_labeling_file_round_trip(tmp_path):
    lab = solve_labeling(path3(), HARD2)
    write_labeling(lab, tmp_path / "l.json")
    back = read_labeling(tmp_path / "l.json")
    assert back.rounded_labels.tolist() == [1, 2, 2]
    assert back.object_map.tolist() == lab.object_map.tolist()


def test_layer_image_needs_segmentation():
    lab = solve_labeling(path3(), HARD2)
    with pytest.raises(ValueError):
        layer_image(lab, path3())
    g = path3().replace(segmentation=np.array([[0, 1, 2]]))
    np.testing.assert_allclose(layer_image(lab, g), [[0.0, 1.0, 1.0]])


def test_ground_shifts_each_part_to_one():
    # two separate pieces: 0-1 and 2-3, plus an isolated node 4
    g = AffinityGraph.from_edges(5, [(0, 1), (2, 3)], [1.0, 1.0], [[(2, 3)]])
    assert ground([2, 3, 3, 4, 5], g).tolist() == [1, 2, 1, 2, 1]
    # seed pairs join parts just like edges do
    g2 = AffinityGraph.from_edges(3, [(0, 1)], [1.0], [[(1, 2)]])
    assert ground([2, 2, 3], g2).tolist() == [1, 1, 2]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ground_never_changes_the_cost(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng)
    labels = rng.integers(1, 5, g.num_nodes)
    for variant in Variant:
        cfg = ModelConfig(variant, levels=4, gamma=0.3, lam=2.0)
        before, ok_before, _ = labeling_objective(g, labels, cfg)
        after, ok_after, _ = labeling_objective(g, ground(labels, g), cfg)
        assert ok_after == ok_before
        if ok_before:
            assert after <= before + 1e-12
            if not variant.has_sigma:
                assert after == pytest.approx(before)
