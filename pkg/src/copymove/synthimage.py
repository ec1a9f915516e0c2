"""Procedural textured test images.

Multi-octave smoothed noise: aperiodic, textured at the descriptor patch
scale, and reproducible from a seed. Used by the self test, the corpus
generator's --synthetic mode and the test suite; avoids shipping or
downloading photographic fixtures.
"""

import numpy as np

from .imgproc import resize_to
from .rng import STREAM_TEXTURE, make_rng

# (cell size in px, relative amplitude); roughly equal energy per octave so
# patches are distinctive at the descriptor scale, like natural detail
_OCTAVES = ((48, 0.8), (24, 0.9), (12, 1.0), (6, 1.0), (3, 0.7))


def _noise_octaves(rng, h, w):
    acc = np.zeros((h, w), dtype=np.float64)
    total = 0.0
    for cell, amp in _OCTAVES:
        gh = max(2, int(np.ceil(h / cell)) + 1)
        gw = max(2, int(np.ceil(w / cell)) + 1)
        grid = rng.standard_normal((gh, gw))
        acc += amp * resize_to(grid.astype(np.float32), h, w).astype(np.float64)
        total += amp
    return acc / total


def textured_image(seed: int, h: int, w: int, channels: int = 3) -> np.ndarray:
    """Smooth aperiodic texture in [0.02, 0.98], float32."""
    if channels not in (1, 3):
        raise ValueError("channels must be 1 or 3")
    rng = make_rng(seed, STREAM_TEXTURE)
    luma = _noise_octaves(rng, h, w)
    luma = 0.5 + 0.16 * luma / max(luma.std(), 1e-9)
    if channels == 1:
        return np.clip(luma, 0.02, 0.98).astype(np.float32)
    out = np.empty((h, w, 3), dtype=np.float64)
    for c in range(3):
        tint = _noise_octaves(rng, h, w)
        out[:, :, c] = luma + 0.05 * tint / max(tint.std(), 1e-9)
    return np.clip(out, 0.02, 0.98).astype(np.float32)
