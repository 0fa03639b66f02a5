"""Depth layers and detachable objects from occlusion evidence."""

from .affinity import AffinityParams, build_occluder_band, superpixelize
from .evaluation import covering_score, gamma_sweep
from .graph_model import AffinityGraph, DepthLabeling, SeedConstraintSet, validate
from .labeling import solve_labeling
from .lp_formulation import ModelConfig, Variant
from .temporal import TemporalParams

__version__ = "0.1.0"
