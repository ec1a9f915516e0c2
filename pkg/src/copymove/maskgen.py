"""Rule-based copy-move mask decoding and mask raster I/O.

The decoder consumes the same inputs a learned decoder would (fitting-error
maps and offset fields) but applies a fixed rule: a pixel is copy-move when
the median of its three fitting errors is below a threshold for at least
one feature family AND its match points back at it (mirror consistency).
The raw decision is cleaned with a median filter and small components are
dropped. Source/target attribution is out of scope here; masks are binary.

PNG conventions:
- binary masks: 8-bit grayscale, 0 background / 255 copy-move;
- 3-class ground truth: RGB, black background, green (0,255,0) source,
  red (255,0,0) target.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .imgproc import bilinear_gather, load_image, require_image, save_image

_SRC_COLOR = (0, 255, 0)
_TGT_COLOR = (255, 0, 0)


@dataclass(frozen=True)
class DecoderConfig:
    eps_threshold: float = 0.5  # fitting-error cutoff, squared pixels
    min_region_px: int = 64
    consistency_tol: float = 4.0  # pixels
    median_radius: int = 2

    def __post_init__(self):
        for name in ("eps_threshold", "min_region_px", "consistency_tol", "median_radius"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


class ClassMask:
    """Per-pixel labels: 0 background, 1 source, 2 target."""

    BACKGROUND, SOURCE, TARGET = 0, 1, 2

    def __init__(self, labels: np.ndarray):
        labels = np.asarray(labels, dtype=np.uint8)
        if labels.ndim != 2:
            raise ValueError(f"labels must be (H, W), got {labels.shape}")
        if labels.max(initial=0) > 2:
            raise ValueError("labels must be in {0, 1, 2}")
        self.labels = labels

    @property
    def shape(self):
        return self.labels.shape

    def binary(self) -> np.ndarray:
        """Background vs copy-move projection."""
        return self.labels > 0

    def counts(self):
        return tuple(int((self.labels == v).sum()) for v in (0, 1, 2))


def mirror_residual(field: np.ndarray) -> np.ndarray:
    """|delta(p + delta(p)) + delta(p)| per pixel, bilinear field lookup."""
    field = np.asarray(field, dtype=np.float32)
    h, w = field.shape[:2]
    pos_y = np.arange(h, dtype=np.float64)[:, None]
    pos_x = np.arange(w, dtype=np.float64)[None, :]
    ty = pos_y + field[:, :, 0]
    tx = pos_x + field[:, :, 1]
    back = bilinear_gather(field, ty, tx)
    return np.hypot(back[:, :, 0] + field[:, :, 0], back[:, :, 1] + field[:, :, 1]).astype(np.float32)


def decode_mask(families, cfg: DecoderConfig) -> np.ndarray:
    """Binary copy-move mask from one or two (errors, field) pairs.

    ``families`` is a sequence of ``(fit_errors, offset_field)`` tuples,
    one per feature family (e.g. the Zernike field and optionally the conv
    field). Shapes: errors (H, W, R), field (H, W, 2), all equal H x W.
    """
    families = list(families)
    if not families:
        raise ValueError("need at least one (errors, field) pair")
    shape = None
    raw = None
    for errs, field in families:
        errs = np.asarray(errs)
        field = np.asarray(field)
        if errs.ndim != 3 or field.ndim != 3 or errs.shape[:2] != field.shape[:2]:
            raise ValueError("errors and field dimensions do not match")
        if shape is None:
            shape = errs.shape[:2]
        elif errs.shape[:2] != shape:
            raise ValueError("families do not share dimensions")
        smooth = np.median(errs, axis=2) < cfg.eps_threshold
        consistent = mirror_residual(field) <= cfg.consistency_tol
        fam = smooth & consistent
        raw = fam if raw is None else (raw | fam)
    size = 2 * cfg.median_radius + 1
    filtered = ndimage.median_filter(raw.astype(np.uint8), size=size, mode="reflect").astype(bool)
    return _drop_small_components(filtered, cfg.min_region_px)


def _drop_small_components(mask: np.ndarray, min_px: int) -> np.ndarray:
    labels, n = ndimage.label(mask, structure=np.ones((3, 3), dtype=np.uint8))
    if n == 0:
        return mask
    counts = np.bincount(labels.ravel())
    keep = counts >= min_px
    keep[0] = False
    return keep[labels]


def overlay(img: np.ndarray, mask) -> np.ndarray:
    """Alpha-blended visualization; accepts a bool mask or a ClassMask."""
    img = require_image(img)
    if img.ndim == 2:
        rgb = np.repeat(img[:, :, None], 3, axis=2).astype(np.float32)
    else:
        rgb = np.asarray(img, dtype=np.float32).copy()
    if isinstance(mask, ClassMask):
        if mask.shape != rgb.shape[:2]:
            raise ValueError("mask dimensions do not match image")
        layers = [(mask.labels == 1, _SRC_COLOR), (mask.labels == 2, _TGT_COLOR)]
    else:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != rgb.shape[:2]:
            raise ValueError("mask dimensions do not match image")
        layers = [(mask, _TGT_COLOR)]
    for sel, color in layers:
        tint = np.array(color, dtype=np.float32) / 255.0
        rgb[sel] = 0.5 * rgb[sel] + 0.5 * tint
    return rgb


def save_binary_mask(path, mask: np.ndarray) -> None:
    mask = np.asarray(mask, dtype=bool)
    save_image(path, mask.astype(np.float32))


def load_binary_mask(path) -> np.ndarray:
    arr = load_image(path)
    if arr.ndim == 3:
        arr = arr.max(axis=2)
    return arr > 0.5


def save_class_mask(path, mask: ClassMask) -> None:
    rgb = np.zeros(mask.shape + (3,), dtype=np.float32)
    rgb[mask.labels == 1] = np.array(_SRC_COLOR, dtype=np.float32) / 255.0
    rgb[mask.labels == 2] = np.array(_TGT_COLOR, dtype=np.float32) / 255.0
    save_image(path, rgb)


def load_class_mask(path) -> ClassMask:
    """Read 3-class RGB truth; grayscale rasters load as binary targets."""
    arr = load_image(path)
    if arr.ndim == 2:
        labels = np.where(arr > 0.5, np.uint8(2), np.uint8(0))
        return ClassMask(labels)
    quant = (arr > 0.5).astype(np.uint8)
    labels = np.zeros(arr.shape[:2], dtype=np.uint8)
    labels[(quant[:, :, 0] == 0) & (quant[:, :, 1] == 1)] = 1
    labels[(quant[:, :, 0] == 1) & (quant[:, :, 1] == 0)] = 2
    return ClassMask(labels)
