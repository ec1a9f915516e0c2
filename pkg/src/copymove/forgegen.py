"""Synthetic copy-move forgery generation with 3-class ground truth.

Per region: sample a random star-shaped polygon, rigidly warp it
(rotation + uniform scale about the polygon center), paste at a random
non-overlapping integer location. Pixels with at least half polygon
coverage are replaced verbatim (so ground-truth target pixels are exact
resampled copies); the sub-half coverage rim is alpha-feathered into the
background to avoid a detectable hard seam. Ground truth labels the
half-coverage regions: source = 1 at the cut site, target = 2 at the paste
site.
"""

import json
import logging
import os
from dataclasses import dataclass, replace

import numpy as np
from PIL import Image, ImageDraw

from .binio import atomic_write_text
from .imgproc import bilinear_gather, load_image, require_image, resize_to, save_image
from .maskgen import ClassMask, save_class_mask
from .rng import STREAM_CORPUS, STREAM_FORGE, derive_key, make_rng

log = logging.getLogger(__name__)

_SUPERSAMPLE = 4
_MAX_ATTEMPTS = 100


@dataclass(frozen=True)
class ForgerySpec:
    """Sampling ranges for one forged image; all intervals are inclusive."""

    vertices: tuple = (3, 12)
    area_frac: tuple = (0.005, 0.1)
    angle: tuple = (-180.0, 180.0)
    scale: tuple = (0.5, 2.0)
    regions: tuple = (1, 3)
    seed: int = 0

    def __post_init__(self):
        if not (3 <= self.vertices[0] <= self.vertices[1]):
            raise ValueError("vertices range must satisfy 3 <= lo <= hi")
        if not (0 < self.area_frac[0] <= self.area_frac[1] <= 0.5):
            raise ValueError("area_frac range must lie in (0, 0.5]")
        if self.angle[0] > self.angle[1]:
            raise ValueError("angle range reversed")
        if not (0 < self.scale[0] <= self.scale[1]):
            raise ValueError("scale range must be positive")
        if not (1 <= self.regions[0] <= self.regions[1]):
            raise ValueError("regions range must satisfy 1 <= lo <= hi")


def _polygon_coverage(verts_rowcol: np.ndarray, h: int, w: int) -> np.ndarray:
    """Per-pixel coverage fraction from supersampled rasterization."""
    ss = _SUPERSAMPLE
    im = Image.new("L", (w * ss, h * ss), 0)
    pts = [((c + 0.5) * ss - 0.5, (r + 0.5) * ss - 0.5) for r, c in verts_rowcol]
    ImageDraw.Draw(im).polygon(pts, fill=255)
    fine = np.asarray(im, dtype=np.float32) / 255.0
    return fine.reshape(h, ss, w, ss).mean(axis=(1, 3))


def _rotate_scale(verts: np.ndarray, angle_deg: float, scale: float) -> np.ndarray:
    t = np.deg2rad(angle_deg)
    ct, st = np.cos(t), np.sin(t)
    rot = np.array([[ct, -st], [st, ct]])  # (row, col) frame
    return scale * verts @ rot.T


def _sample_snippet(img: np.ndarray, src_c, tgt_c, angle_deg: float, scale: float):
    """Inverse-mapped bilinear resampling of the whole raster for one paste."""
    h, w = img.shape[:2]
    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    dy = yy - tgt_c[0]
    dx = xx - tgt_c[1]
    t = np.deg2rad(angle_deg)
    ct, st = np.cos(t), np.sin(t)
    qy = (ct * dy + st * dx) / scale + src_c[0]
    qx = (-st * dy + ct * dx) / scale + src_c[1]
    # snap almost-integer coordinates so exact grid transforms stay bit-exact
    qy = np.where(np.abs(qy - np.rint(qy)) < 1e-9, np.rint(qy), qy)
    qx = np.where(np.abs(qx - np.rint(qx)) < 1e-9, np.rint(qx), qx)
    return bilinear_gather(img, qy, qx).astype(np.float32)


def generate(img: np.ndarray, spec: ForgerySpec):
    """Forge one image.

    Returns ``(forged, truth, details)`` where ``details`` lists per-region
    parameters. Placement retries up to 100 proposals per region; on
    exhaustion the remaining regions are dropped with a warning.
    """
    img = np.asarray(require_image(img), dtype=np.float32)
    h, w = img.shape[:2]
    rng = make_rng(spec.seed, STREAM_FORGE)
    forged = img.copy()
    labels = np.zeros((h, w), dtype=np.uint8)
    occupied = np.zeros((h, w), dtype=bool)
    n_regions = int(rng.integers(spec.regions[0], spec.regions[1] + 1))
    details = []
    for _ in range(n_regions):
        placed = False
        for attempt in range(_MAX_ATTEMPTS):
            nv = int(rng.integers(spec.vertices[0], spec.vertices[1] + 1))
            angle = float(rng.uniform(*spec.angle))
            scale = float(rng.uniform(*spec.scale))
            frac = float(rng.uniform(*spec.area_frac))
            target_area = frac * h * w
            # regular angles with jitter keep the star polygon non-degenerate;
            # the factor calibrates the mean covered area to target_area
            factor = 0.73 * 0.9 * (nv / (2 * np.pi)) * np.sin(2 * np.pi / nv)
            base_r = np.sqrt(target_area / (np.pi * factor))
            theta = 2 * np.pi * (np.arange(nv) + rng.uniform(0.05, 0.95, size=nv)) / nv
            radii = rng.uniform(0.7, 1.0, size=nv) * base_r
            verts = np.stack([radii * np.sin(theta), radii * np.cos(theta)], axis=1)
            warped = _rotate_scale(verts, angle, scale)

            ext_s = int(np.ceil(np.abs(verts).max())) + 2
            ext_t = int(np.ceil(np.abs(warped).max())) + 2
            if 2 * ext_s >= min(h, w) or 2 * ext_t >= min(h, w):
                continue
            src_c = (int(rng.integers(ext_s, h - ext_s)), int(rng.integers(ext_s, w - ext_s)))
            tgt_c = (int(rng.integers(ext_t, h - ext_t)), int(rng.integers(ext_t, w - ext_t)))

            alpha_s = _polygon_coverage(verts + src_c, h, w)
            alpha_t = _polygon_coverage(warped + tgt_c, h, w)
            m_s = alpha_s >= 0.5
            m_t = alpha_t >= 0.5
            if m_s.sum() < 16 or m_t.sum() < 16:
                continue
            if not 0.5 * target_area <= m_s.sum() <= 1.75 * target_area:
                continue
            sup_s = alpha_s > 0
            sup_t = alpha_t > 0
            if (sup_s & sup_t).any() or ((sup_s | sup_t) & occupied).any():
                continue

            snippet = _sample_snippet(img, src_c, tgt_c, angle, scale)
            band = sup_t & ~m_t
            if img.ndim == 3:
                forged[m_t] = snippet[m_t]
                a = alpha_t[band][:, None]
                forged[band] = a * snippet[band] + (1.0 - a) * forged[band]
            else:
                forged[m_t] = snippet[m_t]
                a = alpha_t[band]
                forged[band] = a * snippet[band] + (1.0 - a) * forged[band]
            labels[m_s] = ClassMask.SOURCE
            labels[m_t] = ClassMask.TARGET
            occupied |= sup_s | sup_t
            details.append(
                {
                    "angle": round(angle, 4),
                    "scale": round(scale, 4),
                    "vertices": nv,
                    "src_center": list(src_c),
                    "tgt_center": list(tgt_c),
                    "src_px": int(m_s.sum()),
                    "tgt_px": int(m_t.sum()),
                    "attempts": attempt + 1,
                }
            )
            placed = True
            break
        if not placed:
            log.warning("region placement failed after %d attempts; reducing region count", _MAX_ATTEMPTS)
            break
    if not details:
        raise RuntimeError("could not place any copy-move region; relax the spec or use a larger image")
    return forged, ClassMask(labels), details


MANIFEST_COLUMNS = ("index", "forged", "truth", "source", "seed", "regions", "params")


def generate_corpus(sources, n: int, spec: ForgerySpec, out_dir, resize_px: int = 0) -> str:
    """Write ``n`` forged/truth PNG pairs plus a tab-separated manifest.

    ``sources`` is a directory of images or a list of ``(name, array)``
    pairs; entries are cycled when n exceeds the source count. Returns the
    manifest path. Per-file I/O errors are logged and skipped.
    """
    os.makedirs(out_dir, exist_ok=True)
    if isinstance(sources, (str, os.PathLike)):
        names = sorted(
            f for f in os.listdir(sources) if f.lower().endswith((".png", ".jpg", ".jpeg"))
        )
        if not names and n > 0:
            raise ValueError(f"no source images found in {sources}")
        entries = [(name, os.path.join(sources, name)) for name in names]
    else:
        entries = list(sources)
        if not entries and n > 0:
            raise ValueError("empty source list")

    lines = ["\t".join(MANIFEST_COLUMNS)]
    for i in range(n):
        name, src = entries[i % len(entries)]
        try:
            img = load_image(src) if isinstance(src, (str, os.PathLike)) else src
            if resize_px:
                img = resize_to(img, resize_px, resize_px)
            item_seed = derive_key(spec.seed, STREAM_CORPUS, i)
            forged, truth, details = generate(img, replace(spec, seed=item_seed))
            forged_name = f"{i:05d}_forged.png"
            truth_name = f"{i:05d}_truth.png"
            save_image(os.path.join(out_dir, forged_name), forged)
            save_class_mask(os.path.join(out_dir, truth_name), truth)
        except (OSError, RuntimeError) as exc:
            log.error("skipping corpus entry %d (%s): %s", i, name, exc)
            continue
        lines.append(
            "\t".join(
                [
                    str(i), forged_name, truth_name, str(name), str(item_seed),
                    str(len(details)), json.dumps(details, sort_keys=True),
                ]
            )
        )
    manifest = os.path.join(out_dir, "manifest.tsv")
    atomic_write_text(manifest, "\n".join(lines) + "\n")
    return manifest
