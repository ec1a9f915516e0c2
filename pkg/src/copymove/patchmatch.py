"""Cross-scale PatchMatch over feature pyramids.

Refines a continuous per-pixel offset field (drow, dcol) by iterating:

1. candidate generation: the current offset, 4 zero-order neighbors
   (copy a neighbor's offset; whole-field circular shifts), 8 first-order
   extrapolations (2*near - far along each of 8 directions, exact on
   affine fields, which is what rotation/rescale correspondences induce)
   and 4 random-search perturbations in a square of ``search_radius``;
2. scoring: each candidate gets the best negated L1 feature distance over
   all pairs of pyramid scales, the target descriptor sampled bilinearly;
3. soft selection: a temperature-beta softmax over the 17 scores blends
   the candidates, keeping the update continuous.

Feature maps are standardized (zero mean / unit variance per channel over
the three scales jointly) before matching so the softmax temperature has a
fixed meaning. All randomness is counter-based and keyed by (seed, stage,
iteration), making runs bit-reproducible and thread-count independent.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .features import FeaturePyramid
from .imgproc import bilinear_gather
from .rng import STREAM_INIT, STREAM_SEARCH, derive_key, make_rng

K_CANDIDATES = 17

# neighbor steps (drow, dcol): a..h counterclockwise from the left neighbor;
# zero-order propagation uses the axial four (a, c, e, g)
_DIRS8 = ((0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1))
_DIRS_AXIAL = (_DIRS8[0], _DIRS8[2], _DIRS8[4], _DIRS8[6])


class InvariantError(RuntimeError):
    """An internal contract was violated (e.g. non-finite scores)."""


@dataclass(frozen=True)
class PmConfig:
    """Matcher parameters.

    ``min_offset_norm`` rejects short offsets at initialization (the
    trivial self-match); with ``enforce_min_norm`` (default) offsets below
    the norm are also penalized during scoring, which stops the continuous
    relaxation from sliding back into the self-match through near-zero
    random-search candidates. Disable it to mimic an init-only exclusion,
    e.g. when comparing against an exhaustive nearest-neighbor search.
    """

    iterations: int = 8
    beta: float = 100.0
    search_radius: float = 25.0
    min_offset_norm: float = 8.0
    enforce_min_norm: bool = True
    cross_scale: bool = True
    propagation_steps: tuple = (1, 2, 4, 8)
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise ValueError("beta must be positive")
        if not (np.isfinite(self.search_radius) and self.search_radius > 0):
            raise ValueError("search_radius must be positive")
        if self.min_offset_norm < 0:
            raise ValueError("min_offset_norm must be >= 0")
        if not self.propagation_steps or any(s < 1 for s in self.propagation_steps):
            raise ValueError("propagation_steps must be positive")

    def step_for(self, iteration: int) -> int:
        """Propagation neighbor distance for an iteration (cycled schedule).

        Whole-field shift propagation moves information only one neighbor
        step per iteration, so good offsets found at random spread too
        slowly at a fixed distance 1; cycling through larger strides lets
        isolated correct seeds cover a copy-move region within the default
        iteration budget while keeping the same shift-based candidates.
        """
        return int(self.propagation_steps[iteration % len(self.propagation_steps)])


def standardize_maps(stacked: np.ndarray) -> np.ndarray:
    """Zero-mean/unit-variance per channel across all three scale maps."""
    stacked = np.asarray(stacked, dtype=np.float32)
    mean = stacked.mean(axis=(0, 1, 2), dtype=np.float64)
    std = stacked.std(axis=(0, 1, 2), dtype=np.float64)
    std = np.maximum(std, 1e-6)
    return np.ascontiguousarray((stacked - mean) / std, dtype=np.float32)


def _as_stacked(pyr) -> np.ndarray:
    if isinstance(pyr, FeaturePyramid):
        return pyr.stacked()
    arr = np.ascontiguousarray(pyr, dtype=np.float32)
    if arr.ndim != 4 or arr.shape[0] != 3:
        raise ValueError(f"expected FeaturePyramid or (3, H, W, C) array, got {arr.shape}")
    return arr


def _effective_min_norm(h: int, w: int, requested: float) -> float:
    # keep the rejection region feasible on small rasters
    return min(requested, 0.35 * float(np.hypot(h - 1, w - 1)))


def init_offsets(h: int, w: int, cfg: PmConfig) -> np.ndarray:
    """Random valid target per pixel, offsets shorter than the norm rejected."""
    if h < 2 or w < 2:
        raise ValueError("offset field needs at least a 2x2 raster")
    rng = make_rng(cfg.seed, STREAM_INIT)
    min_norm = _effective_min_norm(h, w, cfg.min_offset_norm)
    pos_y = np.arange(h, dtype=np.float64)[:, None]
    pos_x = np.arange(w, dtype=np.float64)[None, :]
    dy = rng.uniform(0.0, h - 1.0, size=(h, w)) - pos_y
    dx = rng.uniform(0.0, w - 1.0, size=(h, w)) - pos_x
    for _ in range(10000):
        bad = dy * dy + dx * dx < min_norm * min_norm
        count = int(bad.sum())
        if count == 0:
            break
        by, bx = np.nonzero(bad)
        dy[by, bx] = rng.uniform(0.0, h - 1.0, size=count) - by
        dx[by, bx] = rng.uniform(0.0, w - 1.0, size=count) - bx
    else:
        raise InvariantError("offset initialization failed to satisfy the norm constraint")
    field = np.stack([dy, dx], axis=-1).astype(np.float32)
    return field


def zero_order_candidates(field: np.ndarray, step: int = 1) -> np.ndarray:
    """(4, H, W, 2): each pixel takes the offset of an axial neighbor.

    Implemented as whole-field circular shifts; ``step`` scales the
    neighbor distance.
    """
    out = np.empty((4,) + field.shape, dtype=np.float32)
    for idx, (di, dj) in enumerate(_DIRS_AXIAL):
        out[idx] = np.roll(field, shift=(-di * step, -dj * step), axis=(0, 1))
    return out


def first_order_candidates(field: np.ndarray, step: int = 1) -> np.ndarray:
    """(8, H, W, 2): linear extrapolation 2*near - far along 8 directions.

    Exact on affine offset fields for any step, which is what makes
    rotated/rescaled correspondences grow.
    """
    out = np.empty((8,) + field.shape, dtype=np.float32)
    for idx, (di, dj) in enumerate(_DIRS8):
        near = np.roll(field, shift=(-di * step, -dj * step), axis=(0, 1))
        far = np.roll(field, shift=(-2 * di * step, -2 * dj * step), axis=(0, 1))
        out[idx] = 2.0 * near - far
    return out


def random_search_candidates(field: np.ndarray, cfg: PmConfig, iteration: int) -> np.ndarray:
    """(4, H, W, 2): uniform perturbations in the search square, clamped to bounds."""
    h, w = field.shape[:2]
    rng = make_rng(cfg.seed, STREAM_SEARCH, iteration)
    r = float(cfg.search_radius)
    delta = rng.uniform(-r, r, size=(4, h, w, 2))
    cand = field.astype(np.float64) + delta
    return _clamp_targets(cand, h, w)


def _clamp_targets(offsets: np.ndarray, h: int, w: int) -> np.ndarray:
    pos_y = np.arange(h, dtype=np.float64)[:, None]
    pos_x = np.arange(w, dtype=np.float64)[None, :]
    out = np.asarray(offsets, dtype=np.float64).copy()
    out[..., 0] = np.clip(out[..., 0] + pos_y, 0.0, h - 1.0) - pos_y
    out[..., 1] = np.clip(out[..., 1] + pos_x, 0.0, w - 1.0) - pos_x
    return out.astype(np.float32)


def candidate_set(field: np.ndarray, cfg: PmConfig, iteration: int) -> np.ndarray:
    """All 17 candidate offsets per pixel, fixed order:
    current, 4 zero-order, 8 first-order, 4 random-search."""
    step = cfg.step_for(iteration)
    cands = np.empty((K_CANDIDATES,) + field.shape, dtype=np.float32)
    cands[0] = field
    cands[1:5] = zero_order_candidates(field, step)
    cands[5:13] = first_order_candidates(field, step)
    cands[13:17] = random_search_candidates(field, cfg, iteration)
    return cands


def bilinear_sample(fm: np.ndarray, y, x) -> np.ndarray:
    """Descriptor(s) at continuous (row, col); out-of-range coords clamp."""
    return bilinear_gather(fm, y, x)


def score_cross_scale(pyr, pos, cand, cross_scale: bool = True) -> float:
    """Reference single-pixel score: best negated L1 over scale pairs."""
    maps = _as_stacked(pyr)
    i, j = pos
    ty = float(i) + float(cand[0])
    tx = float(j) + float(cand[1])
    pairs = [(n, m) for n in range(3) for m in range(3)] if cross_scale else [(1, 1)]
    best = -np.inf
    for n, m in pairs:
        target = bilinear_sample(maps[m], ty, tx)
        d = float(np.abs(maps[n][i, j].astype(np.float64) - target).sum())
        best = max(best, -d)
    return best


def soft_select(cands: np.ndarray, scores: np.ndarray, beta: float) -> np.ndarray:
    """Softmax-weighted blend of candidates; the relaxed argmax."""
    scores = np.asarray(scores)
    if not np.all(np.isfinite(scores)):
        raise InvariantError("non-finite candidate scores")
    z = beta * scores.astype(np.float64)
    z -= z.max(axis=0)
    wgt = np.exp(z)
    wgt /= wgt.sum(axis=0)
    blended = (cands.astype(np.float64) * wgt[..., None]).sum(axis=0)
    return blended.astype(np.float32)


def score_field(pyr, field: np.ndarray, cross_scale: bool = True) -> np.ndarray:
    """Cross-scale score of each pixel's current offset (no norm penalty)."""
    maps = _as_stacked(pyr)
    cands = np.ascontiguousarray(field[None], dtype=np.float32)
    return kernels.score_candidates(maps, cands, cross_scale, 0.0)[0]


def run_patchmatch(pyr, cfg: PmConfig, diagnostics: bool = False):
    """Iterate candidates -> scores -> soft selection from a random field.

    Returns the final offset field, or ``(field, info)`` with per-iteration
    mean selected scores when ``diagnostics`` is set.
    """
    maps = standardize_maps(_as_stacked(pyr))
    h, w = maps.shape[1:3]
    field = init_offsets(h, w, cfg)
    min_norm = _effective_min_norm(h, w, cfg.min_offset_norm) if cfg.enforce_min_norm else 0.0
    mean_scores = []
    for it in range(cfg.iterations):
        cands = candidate_set(field, cfg, it)
        scores = kernels.score_candidates(maps, cands, cfg.cross_scale, min_norm)
        field = _clamp_targets(soft_select(cands, scores, cfg.beta), h, w)
        if diagnostics:
            mean_scores.append(float(score_field(maps, field, cfg.cross_scale).mean()))
    if diagnostics:
        return field, {"mean_scores": mean_scores}
    return field


def dual_field(pyr_zm, pyr_conv, cfg: PmConfig):
    """Run the matcher per feature family.

    Returns ``(field_conv_or_None, field_zm)``; the conv entry is None when
    no conv pyramid is supplied. Each family draws from its own seed.
    """
    field_zm = run_patchmatch(pyr_zm, cfg)
    field_conv = None
    if pyr_conv is not None:
        cfg_conv = replace(cfg, seed=derive_key(cfg.seed, 0xC0DE))
        field_conv = run_patchmatch(pyr_conv, cfg_conv)
    return field_conv, field_zm
