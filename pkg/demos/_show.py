"""Small helpers shared by the demo scripts."""

import numpy as np

GLYPHS = " .:+#@%&"


def ascii_map(labels, step=4):
    """Coarse character rendering of a label image (one glyph per layer)."""
    sub = np.asarray(labels)[::step, ::step]
    return "\n".join("".join(GLYPHS[min(int(v), len(GLYPHS) - 1)] for v in row) for row in sub)
