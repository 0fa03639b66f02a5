"""Command-line frontend.

Exit codes: 0 success, 1 usage error, 2 invalid input file, 3 infeasible
HARD/MDL problem.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import affinity, evaluation, imageio, labeling, oracle, synth, temporal
from .graph_model import DepthLabeling, graph_from_json, validate, write_graph
from .lp_formulation import DEFAULT_LAMBDA, ModelConfig, Variant
from .lp_solver import INFEASIBLE

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_INFEASIBLE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _load_json(path, what):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise InputError(f"{what}: file not found: {path}") from None
    except (OSError, json.JSONDecodeError) as e:
        raise InputError(f"{what}: cannot parse {path}: {e}") from None


def _load(reader, path, what):
    try:
        return reader(path)
    except FileNotFoundError:
        raise InputError(f"{what}: file not found: {path}") from None
    except (OSError, ValueError, KeyError) as e:
        raise InputError(f"{what}: invalid file {path}: {e}") from None


def _params(args):
    try:
        return affinity.AffinityParams(alpha=args.alpha, beta=args.beta, kappa=args.kappa)
    except ValueError as e:
        raise UsageError(str(e)) from None


def _read_graph(path, args=None, what="--graph"):
    doc = _load_json(path, what)
    try:
        g = graph_from_json(doc, _params(args) if args is not None else None)
        if args is not None and doc.get("weights_precomputed") and _weights_overridden(args):
            g = affinity.compute_weights(g, _params(args))
    except (KeyError, ValueError, TypeError) as e:
        raise InputError(f"{what}: invalid graph {path}: {e}") from None
    report = validate(g)
    if not report.ok:
        raise InputError(f"{what}: invalid graph {path}: {report.problems[0]}")
    return g


def _weights_overridden(args):
    defaults = affinity.AffinityParams()
    return (args.alpha, args.beta, args.kappa) != (defaults.alpha, defaults.beta, defaults.kappa)


def _config(args):
    v = Variant(args.variant)
    if not v.has_sigma and args.levels is None:
        raise UsageError(f"--levels is required with --variant {v.value}")
    if args.levels is not None and args.levels < 2:
        raise UsageError("--levels must be at least 2")
    if args.gamma < 0:
        raise UsageError("--gamma must be non-negative")
    if args.lam < 0:
        raise UsageError("--lambda must be non-negative")
    return ModelConfig(v, levels=args.levels, gamma=args.gamma, lam=args.lam)


def _add_model_args(p, levels_default=None):
    p.add_argument("--variant", choices=[v.value for v in Variant], default=Variant.MDL_SOFT.value,
                   help="hard, mdl, soft, or mdl-soft (extension: layer cost plus slacks)")
    p.add_argument("--levels", type=int, default=levels_default,
                   help="number of layers L (required for hard and soft)")
    p.add_argument("--gamma", type=float, default=0.1, help="cost per layer (default 0.1)")
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA,
                   help=f"cost of discarding one occlusion component (default {DEFAULT_LAMBDA:g})")


def _add_weight_args(p):
    d = affinity.AffinityParams()
    p.add_argument("--alpha", type=float, default=d.alpha, help="intensity weight")
    p.add_argument("--beta", type=float, default=d.beta, help="flow weight")
    p.add_argument("--kappa", type=float, default=d.kappa, help="boundary-probability weight")


def _add_solve_outputs(p):
    p.add_argument("--out", required=True, help="labeling JSON to write")
    p.add_argument("--render", help="write the layer map as a PGM")
    p.add_argument("--render-objects", help="write the object map as a PGM")
    p.add_argument("--method", choices=["highs", "simplex"], default="highs")
    p.add_argument("--rounding", choices=["nearest", "threshold"], default="nearest")


def _solve_and_write(graph, cfg, args):
    if args.rounding == "threshold" and not (cfg.variant == Variant.HARD and cfg.levels == 2):
        raise UsageError("--rounding threshold needs --variant hard --levels 2")
    if (args.render or args.render_objects) and graph.segmentation is None:
        raise UsageError("--render needs a graph with a segmentation map")
    try:
        lab = labeling.solve_labeling(graph, cfg, method=args.method, rounding=args.rounding)
    except labeling.SolveError as e:
        if e.status == INFEASIBLE:
            print(f"error: seed constraints are infeasible for --variant {cfg.variant.value}"
                  + (f" with --levels {cfg.levels}" if cfg.levels else ""), file=sys.stderr)
            return EXIT_INFEASIBLE
        print(f"error: solver stopped with status {e.status}", file=sys.stderr)
        return EXIT_INFEASIBLE
    labeling.write_labeling(lab, args.out)
    if args.render:
        imageio.write_pgm(args.render, labeling.layer_image(lab, graph))
    if args.render_objects:
        obj = labeling.object_image(lab, graph)
        imageio.write_pgm(args.render_objects, obj / max(1, obj.max()))
    rep = labeling.slack_report(lab)
    print(f"sigma={lab.sigma_hat} objects={lab.num_objects} objective={lab.objective:.6g}"
          + (f" rejected={rep['rejected']}" if rep["rejected"] else ""))
    return EXIT_OK


# -- subcommands ------------------------------------------------------------------

def cmd_synth(args):
    doc = _load_json(args.spec, "--spec")
    try:
        spec = synth.SceneSpec.from_json(doc)
    except (KeyError, TypeError, ValueError) as e:
        raise InputError(f"--spec: invalid scene {args.spec}: {e}") from None
    if args.frames < 1:
        raise UsageError("--frames must be positive")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for t in range(args.start, args.start + args.frames):
        try:
            f = synth.render(spec, t)
        except ValueError as e:
            raise InputError(f"--spec: {e}") from None
        masks = synth.corrupt_seeds(synth.seed_masks(f), spec.noise, spec.rng_seed + t)
        stem = out / f"frame{t:03d}"
        imageio.write_pgm(f"{stem}_image.pgm", f.image)
        imageio.write_flow(f"{stem}_flow.json", f.flow_forward)
        imageio.write_flow(f"{stem}_backflow.json", f.flow_backward)
        imageio.write_pgm(f"{stem}_occluded.pgm", masks["occluded"].astype(float))
        imageio.write_pgm(f"{stem}_occluder.pgm", masks["occluder"].astype(float))
        imageio.write_pgm(f"{stem}_truth.pgm", (f.truth_labels - 1) / max(1, len(spec.layers)))
        h, w = f.truth_labels.shape
        Path(f"{stem}_truth.json").write_text(json.dumps(
            {"width": w, "height": h, "labels": f.truth_labels.ravel().tolist()}))
    print(f"wrote {args.frames} frame(s) to {out}")
    return EXIT_OK


def cmd_graph(args):
    img = _load(imageio.read_pgm, args.image, "--image")
    flow = _load(imageio.read_flow, args.flow, "--flow")
    occ = _load(imageio.read_mask, args.occluded, "--occluded")
    if flow.shape[:2] != img.shape:
        raise InputError(f"--flow: {args.flow} is {flow.shape[1]}x{flow.shape[0]}, "
                         f"image is {img.shape[1]}x{img.shape[0]}")
    if occ.shape != img.shape:
        raise InputError(f"--occluded: {args.occluded} does not match the image size")
    if args.occluder:
        ocr = _load(imageio.read_mask, args.occluder, "--occluder")
        if ocr.shape != img.shape:
            raise InputError(f"--occluder: {args.occluder} does not match the image size")
        ocr &= ~occ
    elif occ.any():
        ocr = affinity.build_occluder_band(occ, args.band_width,
                                           flow=None if args.band == "dilate" else flow)
    else:
        ocr = np.zeros_like(occ)
    pb = _load(imageio.read_pgm, args.pb, "--pb") if args.pb else None
    if pb is not None and pb.shape != img.shape:
        raise InputError(f"--pb: {args.pb} does not match the image size")
    try:
        g = affinity.superpixelize(img, flow, occ, ocr, pb_map=pb,
                                   target_count=args.superpixels, params=_params(args))
    except ValueError as e:
        raise UsageError(f"--superpixels: {e}") from None
    write_graph(g, args.out)
    print(f"nodes={g.num_nodes} edges={g.num_edges} components={g.seeds.K} "
          f"seed_pairs={g.seeds.num_pairs}")
    return EXIT_OK


def cmd_solve(args):
    cfg = _config(args)
    g = _read_graph(args.graph, args)
    return _solve_and_write(g, cfg, args)


def cmd_temporal(args):
    cfg = _config(args)
    if not args.tau > 0:
        raise UsageError("--tau must be positive")
    g = _read_graph(args.graph, args)
    prev_g = _read_graph(args.prev_graph, args, "--prev-graph")
    prev = DepthLabeling.from_json(_load_json(args.prev, "--prev"))
    if prev.rounded_labels.size != prev_g.num_nodes:
        raise InputError(f"--prev: {args.prev} has {prev.rounded_labels.size} labels, "
                         f"--prev-graph has {prev_g.num_nodes} nodes")
    bflow = _load(imageio.read_flow, args.backward_flow, "--backward-flow")
    try:
        warped = temporal.warp_labels(prev, prev_g, bflow, g)
    except ValueError as e:
        raise InputError(f"--backward-flow: {e}") from None
    g = temporal.augment_weights(g, warped, temporal.TemporalParams(args.tau))
    return _solve_and_write(g, cfg, args)


def cmd_sweep(args):
    try:
        gammas = evaluation.parse_grid(args.gamma_grid)
        if gammas[0] <= 0:
            raise ValueError("gammas must be positive")
    except ValueError as e:
        raise UsageError(f"--gamma-grid: {e}") from None
    g = _read_graph(args.graph, args)
    rows = evaluation.gamma_sweep(g, gammas, lam=args.lam)
    Path(args.out).write_text(json.dumps([r.to_json() for r in rows], indent=1))
    for r in rows:
        print(f"gamma={r.gamma:g} sigma={r.sigma_hat} status={r.status}")
    return EXIT_OK


def _truth_segments(doc, graph, path):
    if "objects" in doc:
        return evaluation.segments_from_labels(doc["objects"])
    if "width" in doc and "height" in doc:
        if graph is None or graph.segmentation is None:
            raise UsageError("pixel truth needs --graph with a segmentation map")
        truth = np.asarray(doc["labels"]).reshape(doc["height"], doc["width"])
        if truth.shape != graph.segmentation.shape:
            raise InputError(f"--truth: {path} does not match the graph's image size")
        return truth
    if "labels" in doc:
        return evaluation.segments_from_labels(doc["labels"])
    raise InputError(f"--truth: {path} has neither objects, labels nor a pixel map")


def cmd_eval(args):
    pred = DepthLabeling.from_json(_load_json(args.pred, "--pred"))
    graph = _read_graph(args.graph) if args.graph else None
    truth = _truth_segments(_load_json(args.truth, "--truth"), graph, args.truth)
    if isinstance(truth, np.ndarray):
        score = evaluation.covering_maps(truth, pred.object_map[graph.segmentation], args.variant)
    else:
        n = pred.object_map.size
        if graph is not None and graph.num_nodes != n:
            raise InputError(f"--graph has {graph.num_nodes} nodes, --pred has {n} labels")
        if any(max(s, default=-1) >= n for s in truth):
            raise InputError(f"--truth: {args.truth} names nodes beyond the {n} in --pred")
        areas = graph.areas if graph is not None else np.ones(n)
        score = evaluation.covering_score(truth, evaluation.predicted_segments(pred),
                                          areas, args.variant)
    print(json.dumps({"variant": args.variant, "score": score}) if args.json else f"{score:.6f}")
    return EXIT_OK


def cmd_bench(args):
    doc = _load_json(args.cases, "--cases")
    if not isinstance(doc, list):
        raise InputError(f"--cases: {args.cases} must hold a JSON list")
    base = Path(args.cases).parent
    cases = []
    for k, rec in enumerate(doc):
        try:
            g = _read_graph(base / rec["graph"], None, f"--cases[{k}].graph")
            truth = _load_json(base / rec["truth"], f"--cases[{k}].truth")
            t = (np.asarray(truth["labels"]).reshape(truth["height"], truth["width"])
                 if "width" in truth else np.asarray(truth["labels"]))
            cfg = ModelConfig(rec.get("variant", Variant.MDL_SOFT.value),
                              gamma=rec.get("gamma", 0.1), lam=rec.get("lambda", DEFAULT_LAMBDA))
        except (KeyError, ValueError) as e:
            raise InputError(f"--cases[{k}]: {e}") from None
        cases.append({"name": rec.get("name", f"case{k}"), "graph": g, "truth": t,
                      "config": cfg, "true_levels": rec.get("true_levels")})
    print(evaluation.benchmark_report(cases, args.variant, args.format))
    return EXIT_OK


def cmd_oracle(args):
    cfg = _config(args)
    g = _read_graph(args.graph, args)
    try:
        res = oracle.enumerate_optimum(g, cfg, args.max_label)
    except ValueError as e:
        raise UsageError(f"--max-label: {e}") from None
    print(json.dumps({"objective": res.best_objective, "max_label": res.label_range,
                      "labelings": [list(r) for r in res.best_labelings]}))
    if not np.isfinite(res.best_objective):
        return EXIT_INFEASIBLE
    return EXIT_OK


def build_parser():
    p = _Parser(prog="depthlayers", description="Depth layers and detachable objects from occlusions.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    s = sub.add_parser("synth", help="render a synthetic layered scene")
    s.add_argument("--spec", required=True)
    s.add_argument("--frames", type=int, default=1)
    s.add_argument("--start", type=int, default=0, help="index of the first frame")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("graph", help="superpixel affinity graph from an image, flow and masks")
    s.add_argument("--image", required=True)
    s.add_argument("--flow", required=True)
    s.add_argument("--occluded", required=True)
    s.add_argument("--occluder")
    s.add_argument("--pb")
    s.add_argument("--superpixels", type=int, default=400)
    s.add_argument("--band", choices=["duplicate", "dilate"], default="duplicate",
                   help="occluder band strategy when --occluder is absent")
    s.add_argument("--band-width", type=int)
    s.add_argument("--out", required=True)
    _add_weight_args(s)
    s.set_defaults(func=cmd_graph)

    s = sub.add_parser("solve", help="depth layers and objects of one frame")
    s.add_argument("--graph", required=True)
    _add_model_args(s)
    _add_weight_args(s)
    _add_solve_outputs(s)
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("temporal", help="solve with the previous frame's layers folded in")
    s.add_argument("--graph", required=True)
    s.add_argument("--prev", required=True, help="previous labeling JSON")
    s.add_argument("--prev-graph", required=True)
    s.add_argument("--backward-flow", required=True)
    s.add_argument("--tau", type=float, default=2.0, help="forgetting factor (default 2.0)")
    _add_model_args(s)
    _add_weight_args(s)
    _add_solve_outputs(s)
    s.set_defaults(func=cmd_temporal)

    s = sub.add_parser("sweep", help="number of layers across a range of layer costs")
    s.add_argument("--graph", required=True)
    s.add_argument("--gamma-grid", required=True, help="start:stop:step")
    s.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="use the soft variant with this slack cost")
    s.add_argument("--out", required=True)
    _add_weight_args(s)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("eval", help="covering score of a labeling")
    s.add_argument("--pred", required=True)
    s.add_argument("--truth", required=True)
    s.add_argument("--graph", help="node areas and segmentation (needed for pixel truth)")
    s.add_argument("--variant", choices=[evaluation.JACCARD, evaluation.LITERAL],
                   default=evaluation.JACCARD)
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("bench", help="three-row covering table over several cases")
    s.add_argument("--cases", required=True, help="JSON list of {name, graph, truth, ...}")
    s.add_argument("--variant", choices=[evaluation.JACCARD, evaluation.LITERAL],
                   default=evaluation.JACCARD)
    s.add_argument("--format", choices=["text", "json"], default="text")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("oracle", help="exhaustive integer optimum of a small graph")
    s.add_argument("--graph", required=True)
    _add_model_args(s)
    _add_weight_args(s)
    s.add_argument("--max-label", type=int, default=4)
    s.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except SystemExit as e:  # --help
        return int(e.code or 0)


if __name__ == "__main__":
    sys.exit(main())
