"""A textured square slides right over a still background.

The pixels just ahead of the square disappear in the next frame; the square
pixels next to them are what hides them. That one piece of evidence is
enough for the solver to put the whole square on a nearer layer, because the
affinity graph makes it cheap to keep the square together and expensive to
cut it anywhere except along its outline.
"""

import argparse
from pathlib import Path

from depthlayers.affinity import superpixelize
from depthlayers.imageio import write_pgm
from depthlayers.labeling import layer_image, object_image, solve_labeling
from depthlayers.lp_formulation import ModelConfig, Variant
from depthlayers.synth import Layer, SceneSpec, Texture, render, seed_masks

from _show import ascii_map

ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
ap.add_argument("--out", default="demo_out", help="directory for the PGM images")
args = ap.parse_args()
out = Path(args.out)
out.mkdir(exist_ok=True)

spec = SceneSpec(64, 64, (Layer("rect", 20, 18, 22, 24, (3.0, 1.0), Texture("noise", 0.7, 0.3, 2, 1)),),
                 background=Texture("noise", 0.25, 0.3, 2, 2))
frame = render(spec, 0)
masks = seed_masks(frame)
print(f"occluded pixels: {masks['occluded'].sum()}, occluder pixels: {masks['occluder'].sum()}")

graph = superpixelize(frame.image, frame.flow_forward, masks["occluded"], masks["occluder"], target_count=250)
print(f"graph: {graph.num_nodes} superpixels, {graph.num_edges} edges, "
      f"{graph.seeds.num_pairs} ordering pairs in {graph.seeds.K} group(s)")

# Two fixed levels need no layer cost; the same answer comes out of the
# default model, which also chooses how many layers to use.
for cfg in (ModelConfig(Variant.HARD, levels=2), ModelConfig()):
    lab = solve_labeling(graph, cfg)
    print(f"{cfg.variant.value:>8}: {lab.sigma_hat} layers, {lab.num_objects} object(s), "
          f"objective {lab.objective:.3f}")

print(ascii_map(lab.rounded_labels[graph.segmentation]))
write_pgm(out / "square_image.pgm", frame.image)
write_pgm(out / "square_layers.pgm", layer_image(lab, graph))
write_pgm(out / "square_objects.pgm", object_image(lab, graph) / max(1, lab.num_objects))
print(f"images written to {out}/")
