import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import opposing, path3
from depthlayers.cli import EXIT_INFEASIBLE, EXIT_INPUT, EXIT_OK, EXIT_USAGE, main
from depthlayers.graph_model import write_graph
from depthlayers.synth import nested_scene


@pytest.fixture
def fixture_graph(tmp_path):
    p = tmp_path / "g.json"
    write_graph(path3(), p, include_weights=True)
    return p


def test_solve_three_node_fixture(tmp_path, fixture_graph):
    out = tmp_path / "labels.json"
    rc = main(["solve", "--graph", str(fixture_graph), "--variant", "hard", "--levels", "2",
               "--out", str(out)])
    assert rc == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["labels"] == [1, 2, 2]
    assert doc["objective"] == pytest.approx(1.0)
    assert doc["objects"] == [0, 1, 1]


def test_solve_is_deterministic(tmp_path, fixture_graph):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        assert main(["solve", "--graph", str(fixture_graph), "--out", str(p)]) == EXIT_OK
    assert a.read_text() == b.read_text()


def test_missing_levels_is_usage_error(tmp_path, fixture_graph, capsys):
    rc = main(["solve", "--graph", str(fixture_graph), "--variant", "hard", "--out", str(tmp_path / "x")])
    assert rc == EXIT_USAGE
    assert "--levels" in capsys.readouterr().err


def test_unknown_flag_is_usage_error(capsys):
    assert main(["solve", "--bogus"]) == EXIT_USAGE
    assert main([]) == EXIT_USAGE


def test_missing_file_names_it(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    rc = main(["solve", "--graph", str(missing), "--out", str(tmp_path / "x")])
    assert rc == EXIT_INPUT
    assert "nope.json" in capsys.readouterr().err


def test_malformed_graph(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"nodes": [{"id": 0}]}')
    assert main(["solve", "--graph", str(p), "--out", str(tmp_path / "x")]) == EXIT_INPUT


def test_infeasible_hard(tmp_path, capsys):
    p = tmp_path / "opp.json"
    write_graph(opposing(), p, include_weights=True)
    rc = main(["solve", "--graph", str(p), "--variant", "hard", "--levels", "3", "--out", str(tmp_path / "x")])
    assert rc == EXIT_INFEASIBLE
    assert "infeasible" in capsys.readouterr().err
    # the soft variant repairs the contradiction
    assert main(["solve", "--graph", str(p), "--variant", "soft", "--levels", "3", "--lambda", "1",
                 "--out", str(tmp_path / "y")]) == EXIT_OK
    doc = json.loads((tmp_path / "y").read_text())
    assert doc["labels"][0] == doc["labels"][1]
    assert doc["slacks"] == pytest.approx([1.0, 1.0])


def test_eval_self_score(tmp_path, fixture_graph, capsys):
    out = tmp_path / "labels.json"
    main(["solve", "--graph", str(fixture_graph), "--variant", "hard", "--levels", "2", "--out", str(out)])
    capsys.readouterr()
    assert main(["eval", "--pred", str(out), "--truth", str(out)]) == EXIT_OK
    assert float(capsys.readouterr().out) == 1.0
    assert main(["eval", "--pred", str(out), "--truth", str(out), "--variant", "literal", "--json"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["score"] == 0.5


def test_oracle_subcommand(fixture_graph, capsys):
    assert main(["oracle", "--graph", str(fixture_graph), "--variant", "hard", "--levels", "2"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["objective"] == 1.0
    assert doc["labelings"] == [[1, 2, 2]]


def test_sweep_subcommand(tmp_path, fixture_graph):
    out = tmp_path / "sweep.json"
    assert main(["sweep", "--graph", str(fixture_graph), "--gamma-grid", "0.1:0.5:0.2", "--out", str(out)]) == EXIT_OK
    rows = json.loads(out.read_text())
    assert [r["gamma"] for r in rows] == [0.1, 0.3, 0.5]
    assert all(r["sigma"] == 2 for r in rows)
    assert main(["sweep", "--graph", str(fixture_graph), "--gamma-grid", "0:1:0.5", "--out", str(out)]) == EXIT_USAGE


def test_pipeline_end_to_end(tmp_path, capsys):
    spec = tmp_path / "scene.json"
    spec.write_text(json.dumps(nested_scene().to_json()))
    d = tmp_path / "frames"
    assert main(["synth", "--spec", str(spec), "--frames", "2", "--out", str(d)]) == EXIT_OK
    first = (d / "frame000_image.pgm").read_bytes()
    assert main(["synth", "--spec", str(spec), "--frames", "1", "--out", str(tmp_path / "again")]) == EXIT_OK
    assert (tmp_path / "again" / "frame000_image.pgm").read_bytes() == first

    graphs = []
    for t in (0, 1):
        g = tmp_path / f"g{t}.json"
        assert main(["graph", "--image", str(d / f"frame{t:03d}_image.pgm"),
                     "--flow", str(d / f"frame{t:03d}_flow.json"),
                     "--occluded", str(d / f"frame{t:03d}_occluded.pgm"),
                     "--occluder", str(d / f"frame{t:03d}_occluder.pgm"),
                     "--superpixels", "300", "--out", str(g)]) == EXIT_OK
        graphs.append(g)
    lab0 = tmp_path / "l0.json"
    layers = tmp_path / "layers.pgm"
    assert main(["solve", "--graph", str(graphs[0]), "--out", str(lab0), "--render", str(layers)]) == EXIT_OK
    assert layers.read_bytes().startswith(b"P5")
    capsys.readouterr()
    assert main(["eval", "--pred", str(lab0), "--truth", str(d / "frame000_truth.json"),
                 "--graph", str(graphs[0])]) == EXIT_OK
    assert float(capsys.readouterr().out) >= 0.95

    lab1 = tmp_path / "l1.json"
    assert main(["temporal", "--graph", str(graphs[1]), "--prev", str(lab0), "--prev-graph", str(graphs[0]),
                 "--backward-flow", str(d / "frame001_backflow.json"), "--out", str(lab1)]) == EXIT_OK
    assert json.loads(lab1.read_text())["sigma"] == 3


def test_graph_builds_band_without_occluder(tmp_path):
    spec = tmp_path / "scene.json"
    spec.write_text(json.dumps(nested_scene(64).to_json()))
    d = tmp_path / "f"
    main(["synth", "--spec", str(spec), "--out", str(d)])
    g = tmp_path / "g.json"
    assert main(["graph", "--image", str(d / "frame000_image.pgm"), "--flow", str(d / "frame000_flow.json"),
                 "--occluded", str(d / "frame000_occluded.pgm"), "--superpixels", "200",
                 "--out", str(g)]) == EXIT_OK
    doc = json.loads(g.read_text())
    assert doc["seeds"] and all(s["pairs"] for s in doc["seeds"])


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "depthlayers", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for sub in ("synth", "graph", "solve", "temporal", "sweep", "eval", "oracle"):
        assert sub in r.stdout
