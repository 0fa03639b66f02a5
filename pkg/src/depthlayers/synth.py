"""Layered translating scenes with exact occlusion ground truth.

Layers are listed far to near over a background. Every layer carries a
texture attached to its own coordinates, so intensities move with it, and
occlusion masks are derived from the shape geometry rather than from the
rendered images.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .affinity import occlusion_components


@dataclass(frozen=True)
class Texture:
    kind: str = "noise"      # "noise" or "flat"
    mean: float = 0.5
    contrast: float = 0.35
    scale: int = 2           # texel size in pixels
    seed: int = 0


@dataclass(frozen=True)
class Layer:
    shape: str               # "rect" or "ellipse"
    x: float                 # bounding box at t = 0
    y: float
    width: float
    height: float
    velocity: tuple = (0.0, 0.0)
    texture: Texture = field(default_factory=Texture)

    def contains(self, px, py, t):
        """Membership of points (px, py) at time t."""
        x0 = self.x + self.velocity[0] * t
        y0 = self.y + self.velocity[1] * t
        if self.shape == "rect":
            return (px >= x0) & (px < x0 + self.width) & (py >= y0) & (py < y0 + self.height)
        if self.shape == "ellipse":
            rx, ry = self.width / 2, self.height / 2
            return ((px - x0 - rx) / rx) ** 2 + ((py - y0 - ry) / ry) ** 2 <= 1.0
        raise ValueError(f"unknown shape {self.shape!r}")

    def inside_frame(self, width, height, t) -> bool:
        x0 = self.x + self.velocity[0] * t
        y0 = self.y + self.velocity[1] * t
        return x0 >= 0 and y0 >= 0 and x0 + self.width <= width and y0 + self.height <= height


@dataclass(frozen=True)
class NoiseModel:
    intensity_sigma: float = 0.0
    seed_dropout: float = 0.0
    spurious_seed_rate: int = 0


@dataclass(frozen=True)
class SceneSpec:
    width: int
    height: int
    layers: tuple = ()
    background: Texture = field(default_factory=lambda: Texture(mean=0.3))
    background_velocity: tuple = (0.0, 0.0)
    noise: NoiseModel = field(default_factory=NoiseModel)
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, doc: dict) -> "SceneSpec":
        layers = []
        for ly in doc.get("layers", []):
            ly = dict(ly)
            ly["texture"] = Texture(**ly.get("texture", {}))
            ly["velocity"] = tuple(ly.get("velocity", (0.0, 0.0)))
            layers.append(Layer(**ly))
        return cls(
            width=int(doc["width"]), height=int(doc["height"]), layers=tuple(layers),
            background=Texture(**doc.get("background", {"mean": 0.3})),
            background_velocity=tuple(doc.get("background_velocity", (0.0, 0.0))),
            noise=NoiseModel(**doc.get("noise", {})),
            rng_seed=int(doc.get("rng_seed", 0)),
        )


def load_scene(path) -> SceneSpec:
    return SceneSpec.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True, eq=False)
class Frame:
    image: np.ndarray
    flow_forward: np.ndarray
    flow_backward: np.ndarray
    occluded: np.ndarray        # visible now, hidden by a nearer layer next frame
    unoccluded: np.ndarray      # visible now, hidden by a nearer layer last frame
    occluder_forward: np.ndarray
    occluder_backward: np.ndarray
    truth_labels: np.ndarray    # 1 background, k + 1 for layer k (1-based, far to near)

    @property
    def occluded_any(self):
        return self.occluded | self.unoccluded

    @property
    def occluder_any(self):
        return (self.occluder_forward | self.occluder_backward) & ~self.occluded_any


def _hash_noise(ix, iy, seed):
    """Deterministic uniform [0, 1) value per integer texel (splitmix64)."""
    with np.errstate(over="ignore"):
        z = (ix.astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15)
             ^ iy.astype(np.uint64) * np.uint64(0xC2B2AE3D27D4EB4F)
             ^ np.uint64(seed & 0xFFFFFFFF) * np.uint64(0x165667B19E3779F9))
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def _texture_values(tex: Texture, lx, ly, salt):
    if tex.kind == "flat":
        return np.full(lx.shape, tex.mean)
    if tex.kind != "noise":
        raise ValueError(f"unknown texture kind {tex.kind!r}")
    ix = np.floor(lx / tex.scale).astype(np.int64)
    iy = np.floor(ly / tex.scale).astype(np.int64)
    u = _hash_noise(ix, iy, tex.seed * 7919 + salt)
    return np.clip(tex.mean + tex.contrast * (2 * u - 1), 0.0, 1.0)


def _velocities(spec: SceneSpec) -> np.ndarray:
    return np.array([spec.background_velocity] + [ly.velocity for ly in spec.layers], float)


def visible_layers(spec: SceneSpec, t, px=None, py=None) -> np.ndarray:
    """Index of the nearest layer covering each point (0 = background)."""
    if px is None:
        yy, xx = np.mgrid[0:spec.height, 0:spec.width]
        px, py = xx + 0.5, yy + 0.5
    vis = np.zeros(np.shape(px), np.int64)
    for k, ly in enumerate(spec.layers, start=1):
        vis[ly.contains(px, py, t)] = k
    return vis


def _covered_by_nearer(spec, vis, px, py, t):
    """Is each point hidden at time t by a layer nearer than ``vis``?"""
    out = np.zeros(np.shape(px), bool)
    who = np.zeros(np.shape(px), np.int64)
    for k, ly in enumerate(spec.layers, start=1):
        hit = (k > vis) & ly.contains(px, py, t)
        out |= hit
        who[hit] = k
    return out, who


def render(spec: SceneSpec, t: int = 0) -> Frame:
    """Image, flows, occlusion masks and truth layers of frame ``t``."""
    W, H = spec.width, spec.height
    for k, ly in enumerate(spec.layers, start=1):
        for tt in (t - 1, t, t + 1):
            if not ly.inside_frame(W, H, tt):
                raise ValueError(f"layer {k} leaves the frame at t={tt}")
    yy, xx = np.mgrid[0:H, 0:W]
    px, py = xx + 0.5, yy + 0.5
    vel = _velocities(spec)
    vis = visible_layers(spec, t, px, py)

    img = _texture_values(spec.background, px - vel[0, 0] * t, py - vel[0, 1] * t, 0)
    for k, ly in enumerate(spec.layers, start=1):
        m = vis == k
        lx = px[m] - ly.x - ly.velocity[0] * t
        lyy = py[m] - ly.y - ly.velocity[1] * t
        img[m] = _texture_values(ly.texture, lx, lyy, k)
    if spec.noise.intensity_sigma > 0:
        rng = np.random.default_rng([spec.rng_seed, t])
        img = np.clip(img + rng.normal(0, spec.noise.intensity_sigma, img.shape), 0, 1)

    v = vel[vis]
    fwd, who_f = _covered_by_nearer(spec, vis, px + v[..., 0], py + v[..., 1], t + 1)
    bwd, who_b = _covered_by_nearer(spec, vis, px - v[..., 0], py - v[..., 1], t - 1)
    occ_f = _occluder_mask(vis, fwd, who_f, vel, xx, yy, +1)
    occ_b = _occluder_mask(vis, bwd, who_b, vel, xx, yy, -1)
    return Frame(img, v.copy(), -v, fwd, bwd, occ_f & ~fwd, occ_b & ~bwd, vis + 1)


def _occluder_mask(vis, occluded, who, vel, xx, yy, direction):
    """Pixels of the covering layer that will sweep over (or just left) the occluded pixels.

    A point of layer ``l`` at pixel p is hidden at t+d by layer m; the
    covering point of m sits at p + d * (v_l - v_m) at time t.
    """
    H, W = vis.shape
    out = np.zeros_like(occluded)
    if not occluded.any():
        return out
    m = who[occluded]
    l = vis[occluded]
    dv = vel[l] - vel[m]
    qx = np.floor(xx[occluded] + 0.5 + direction * dv[:, 0]).astype(np.int64)
    qy = np.floor(yy[occluded] + 0.5 + direction * dv[:, 1]).astype(np.int64)
    ok = (qx >= 0) & (qx < W) & (qy >= 0) & (qy < H)
    qx, qy, m = qx[ok], qy[ok], m[ok]
    hit = vis[qy, qx] == m
    out[qy[hit], qx[hit]] = True
    return out


def corrupt_seeds(masks: dict, noise: NoiseModel, rng_seed: int = 0) -> dict:
    """Simulate detector errors on {"occluded", "occluder"} masks.

    Each occluded component (with the occluder pixels nearest to it) is
    dropped with probability ``seed_dropout``; then ``spurious_seed_rate``
    false occluded/occluder strip pairs are painted on free ground.
    """
    rng = np.random.default_rng(rng_seed)
    occ = np.asarray(masks["occluded"], bool).copy()
    ocr = np.asarray(masks["occluder"], bool).copy()
    lab, K = occlusion_components(occ)
    if K:
        _, (iy, ix) = ndimage.distance_transform_edt(lab == 0, return_indices=True)
        nearest = lab[iy, ix]
        drop = np.flatnonzero(rng.random(K) < noise.seed_dropout) + 1
        gone = np.isin(lab, drop)
        occ &= ~gone
        ocr &= ~np.isin(nearest, drop)
    H, W = occ.shape
    for _ in range(int(noise.spurious_seed_rate)):
        for _attempt in range(1000):
            length = int(rng.integers(4, 9))
            vertical = bool(rng.integers(0, 2))
            h, w = (length, 4) if vertical else (4, length)
            if h + 2 > H or w + 2 > W:
                raise ValueError("frame too small for spurious seeds")
            y0 = int(rng.integers(1, H - h))
            x0 = int(rng.integers(1, W - w))
            window = (slice(y0 - 1, y0 + h + 1), slice(x0 - 1, x0 + w + 1))
            if occ[window].any() or ocr[window].any():
                continue
            if vertical:
                occ[y0:y0 + h, x0:x0 + 2] = True
                ocr[y0:y0 + h, x0 + 2:x0 + 4] = True
            else:
                occ[y0:y0 + 2, x0:x0 + w] = True
                ocr[y0 + 2:y0 + 4, x0:x0 + w] = True
            break
        else:
            raise RuntimeError("no free room for a spurious seed")
    return {"occluded": occ, "occluder": ocr & ~occ}


def nested_scene(size=96, seed=0, flat=False) -> SceneSpec:
    """Background, a large shape moving right, and a smaller one sliding across it.

    The near shape stays inside the far one at t-1..t+1, so every boundary
    of the far shape is against the background.
    """
    if flat:
        tex = lambda m, s: Texture("flat", m)
    else:
        tex = lambda m, s: Texture("noise", m, 0.3, 2, s)
    k = size / 96
    return SceneSpec(
        width=size, height=size,
        layers=(
            Layer("rect", 18 * k, 20 * k, 56 * k, 52 * k, (2.0, 0.0), tex(0.55, seed + 1)),
            Layer("rect", 36 * k, 36 * k, 22 * k, 20 * k, (-2.0, 2.0), tex(0.8, seed + 2)),
        ),
        background=tex(0.25, seed),
        rng_seed=seed,
    )


def seed_masks(frame: Frame) -> dict:
    """Exact occlusion evidence of a frame, in the form corrupt_seeds expects."""
    return {"occluded": frame.occluded_any, "occluder": frame.occluder_any}
