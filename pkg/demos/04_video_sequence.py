"""Layers across a short sequence.

Each frame is solved on its own graph, but edges between superpixels that
the previous frame put on the same object layer get extra weight; the
previous labels are carried forward with the backward flow. This lets a
frame reuse structure its own evidence no longer shows, but it also carries
mistakes forward: once the background shares a layer with an object, the
boundary between them is reinforced in the next frame too. The table shows
both, next to what each frame gets on its own.
"""

import argparse

from depthlayers.affinity import superpixelize
from depthlayers.evaluation import covering_maps
from depthlayers.labeling import solve_labeling
from depthlayers.lp_formulation import ModelConfig
from depthlayers.synth import NoiseModel, corrupt_seeds, nested_scene, render, seed_masks
from depthlayers.temporal import TemporalParams, augment_weights, warp_labels

ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
ap.add_argument("--frames", type=int, default=5)
ap.add_argument("--dropout", type=float, default=0.6)
ap.add_argument("--tau", type=float, default=2.0)
ap.add_argument("--seed", type=int, default=0)
args = ap.parse_args()

spec = nested_scene()
cfg = ModelConfig()
prev = None
print("frame  groups  objects alone/history  covering alone/history")
for t in range(args.frames):
    frame = render(spec, t)
    # the first frame keeps all its evidence, later ones lose some
    noise = NoiseModel(seed_dropout=0.0 if t == 0 else args.dropout)
    m = corrupt_seeds(seed_masks(frame), noise, 100 * args.seed + t)
    g = superpixelize(frame.image, frame.flow_forward, m["occluded"], m["occluder"])
    alone = lab = solve_labeling(g, cfg)
    if prev is not None:
        warped = warp_labels(prev[0], prev[1], frame.flow_backward, g)
        lab = solve_labeling(augment_weights(g, warped, TemporalParams(args.tau)), cfg)
    score = lambda x: covering_maps(frame.truth_labels, x.object_map[g.segmentation])
    print(f"{t:5d}  {g.seeds.K:6d}  {alone.num_objects:13d}/{lab.num_objects:<7d}  "
          f"{score(alone):14.3f}/{score(lab):.3f}")
    prev = (lab, g)
