"""PGM images and JSON flow fields."""

import json
from pathlib import Path

import numpy as np


def read_pgm(path) -> np.ndarray:
    """Read a P2 or P5 graymap, returning floats in [0, 1]."""
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    # header: magic, width, height, maxval, with '#' comments allowed
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError(f"{path}: truncated PGM header")
        tokens.append(data[start:pos])
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic == b"P5":
        pos += 1
        dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
        raw = np.frombuffer(data, dtype=dtype, count=w * h, offset=pos)
    elif magic == b"P2":
        raw = np.array(data[pos:].split()[: w * h], dtype=np.int64)
    else:
        raise ValueError(f"{path}: not a PGM file (magic {magic!r})")
    if raw.size != w * h:
        raise ValueError(f"{path}: expected {w * h} pixels, found {raw.size}")
    return raw.reshape(h, w).astype(float) / maxval


def write_pgm(path, image, binary: bool = True):
    """Write values in [0, 1] as an 8-bit graymap."""
    img = np.clip(np.rint(np.asarray(image, float) * 255), 0, 255).astype(np.uint8)
    h, w = img.shape
    if binary:
        Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + img.tobytes())
    else:
        rows = "\n".join(" ".join(str(v) for v in row) for row in img)
        Path(path).write_text(f"P2\n{w} {h}\n255\n{rows}\n")


def read_mask(path) -> np.ndarray:
    return read_pgm(path) >= 0.5


def flow_to_json(flow) -> dict:
    flow = np.asarray(flow, float)
    h, w, _ = flow.shape
    return {"width": w, "height": h,
            "vx": flow[..., 0].ravel().tolist(), "vy": flow[..., 1].ravel().tolist()}


def flow_from_json(doc) -> np.ndarray:
    w, h = int(doc["width"]), int(doc["height"])
    vx = np.asarray(doc["vx"], float)
    vy = np.asarray(doc["vy"], float)
    if vx.size != w * h or vy.size != w * h:
        raise ValueError(f"flow: expected {w * h} samples per component")
    return np.stack([vx.reshape(h, w), vy.reshape(h, w)], axis=-1)


def write_flow(path, flow):
    Path(path).write_text(json.dumps(flow_to_json(flow)))


def read_flow(path) -> np.ndarray:
    return flow_from_json(json.loads(Path(path).read_text()))
