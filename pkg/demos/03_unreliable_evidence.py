"""Missing and spurious occlusion evidence.

A real occlusion detector misses boundaries and fires where nothing is
hidden. Missing evidence loses objects: a shape with no ordering pairs left
stays on the background layer. Spurious pairs on flat ground are cheap to
satisfy, so they show up as small extra objects that barely move the
covering score.

The soft model's penalty lambda is weighed against the cost of cutting an
object out along its outline. Lowering it therefore gives up the largest
objects first, whether their evidence is real or not, and the slack report
lists which groups were dropped.
"""

import numpy as np

from depthlayers.affinity import superpixelize
from depthlayers.evaluation import covering_maps
from depthlayers.labeling import slack_report, solve_labeling
from depthlayers.lp_formulation import ModelConfig
from depthlayers.synth import NoiseModel, corrupt_seeds, nested_scene, render, seed_masks


def graph_for(frame, masks):
    return superpixelize(frame.image, frame.flow_forward, masks["occluded"], masks["occluder"])


def covering(frame, graph, lab):
    return covering_maps(frame.truth_labels, lab.object_map[graph.segmentation])


frame = render(nested_scene(), 0)
exact = seed_masks(frame)

print("dropout  mean covering over 10 draws")
for p in (0.0, 0.3, 0.6, 1.0):
    scores = []
    for s in range(10):
        g = graph_for(frame, corrupt_seeds(exact, NoiseModel(seed_dropout=p), s))
        scores.append(covering(frame, g, solve_labeling(g, ModelConfig())))
    print(f"{p:7.1f}  {np.mean(scores):.3f}")

noisy = corrupt_seeds(exact, NoiseModel(spurious_seed_rate=2), 1)
g = graph_for(frame, noisy)
# groups whose occluded superpixels lie on no truly occluded pixel are the fake ones
fake = [k for k in range(1, g.seeds.K + 1)
        if not exact["occluded"][np.isin(g.segmentation, np.flatnonzero(g.region_component == k)) & noisy["occluded"]].any()]
print(f"\ntwo spurious strips added: {g.seeds.K} groups, fake ones {fake}")
print("lambda  layers  objects  covering  rejected")
for lam in (100.0, 30.0, 10.0):
    lab = solve_labeling(g, ModelConfig(lam=lam))
    print(f"{lam:6g}  {lab.sigma_hat:6d}  {lab.num_objects:7d}  {covering(frame, g, lab):8.3f}  "
          f"{slack_report(lab)['rejected']}")
