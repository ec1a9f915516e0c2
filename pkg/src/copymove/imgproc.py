"""Core raster operations: resampling, color, rigid warps, degradations.

Conventions shared by the whole package:

- Images are numpy float32 arrays with samples in [0, 1]; ``(H, W)`` for
  single-channel, ``(H, W, 3)`` for color; row-major, channel-interleaved.
- Pixel centers sit at integer ``(row, col)`` coordinates. Resampling uses
  the half-pixel-center mapping, so window geometry stays consistent
  between resize, warps and feature sampling.
- Resized dimensions round half up: ``floor(ratio * dim + 0.5)``.
- Warps never extrapolate: samples falling outside the source raster are
  reported through a validity mask instead.
"""

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .binio import atomic_write_bytes
from .rng import STREAM_NOISE, make_rng

PYRAMID_DOWN = 0.75
PYRAMID_UP = 1.5

# ITU-R BT.601 luma weights
_LUMA = (0.299, 0.587, 0.114)


def require_image(img: np.ndarray, channels=None) -> np.ndarray:
    """Validate the (H, W[, C]) raster layout and return the array.

    ``channels`` pins an exact channel count where an operation demands
    one; rasters with other depths (e.g. feature maps) pass otherwise.
    """
    img = np.asarray(img)
    if img.ndim not in (2, 3):
        raise ValueError(f"expected (H, W) or (H, W, C) raster, got shape {img.shape}")
    if channels is not None:
        have = 1 if img.ndim == 2 else img.shape[2]
        if have != channels:
            raise ValueError(f"expected {channels}-channel image, got {have}")
    return img


def scaled_dim(n: int, r: float) -> int:
    """Output size for resizing n samples by ratio r (round half up, min 1)."""
    return max(1, int(np.floor(n * r + 0.5)))


def _axis_coords(n_in: int, n_out: int):
    # half-pixel-center mapping, clamped to the valid sample range
    c = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    c = np.clip(c, 0.0, n_in - 1.0)
    i0 = np.floor(c).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, c - i0


def resize_to(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize to explicit dimensions; channels pass through."""
    img = require_image(img)
    if out_h < 1 or out_w < 1:
        raise ValueError("output dimensions must be >= 1")
    h, w = img.shape[:2]
    y0, y1, fy = _axis_coords(h, out_h)
    x0, x1, fx = _axis_coords(w, out_w)
    src = img.astype(np.float64, copy=False)
    if img.ndim == 3:
        fy = fy[:, None, None]
        fx = fx[None, :, None]
    else:
        fy = fy[:, None]
        fx = fx[None, :]
    top = src[y0][:, x0] * (1.0 - fx) + src[y0][:, x1] * fx
    bot = src[y1][:, x0] * (1.0 - fx) + src[y1][:, x1] * fx
    return (top * (1.0 - fy) + bot * fy).astype(np.float32)


def resize(img: np.ndarray, r: float) -> np.ndarray:
    """Bilinear resize by ratio r; output dims = round-half-up(r * dims)."""
    if not np.isfinite(r) or r <= 0:
        raise ValueError(f"resize ratio must be a positive finite number, got {r}")
    h, w = require_image(img).shape[:2]
    return resize_to(img, scaled_dim(h, r), scaled_dim(w, r))


@dataclass(frozen=True)
class ScalePyramid:
    """Base image plus its down/up rescales used for cross-scale matching."""

    base: np.ndarray
    down: np.ndarray
    up: np.ndarray
    r_down: float = PYRAMID_DOWN
    r_up: float = PYRAMID_UP


def build_pyramid(img: np.ndarray, r_down: float = PYRAMID_DOWN, r_up: float = PYRAMID_UP) -> ScalePyramid:
    img = require_image(img)
    return ScalePyramid(
        base=np.asarray(img, dtype=np.float32),
        down=resize(img, r_down),
        up=resize(img, r_up),
        r_down=r_down,
        r_up=r_up,
    )


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """BT.601 luma of a 3-channel image; returns (H, W)."""
    img = require_image(img, channels=3)
    src = img.astype(np.float64, copy=False)
    gray = _LUMA[0] * src[:, :, 0] + _LUMA[1] * src[:, :, 1] + _LUMA[2] * src[:, :, 2]
    return gray.astype(np.float32)


def as_gray(img: np.ndarray) -> np.ndarray:
    """Return single-channel view of an image, converting color if needed."""
    img = require_image(img)
    if img.ndim == 2:
        return np.asarray(img, dtype=np.float32)
    if img.shape[2] == 1:
        return np.asarray(img[:, :, 0], dtype=np.float32)
    return to_grayscale(img)


def bilinear_gather(img: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Bilinear samples at continuous (row, col) positions, clamped to bounds.

    ``ys``/``xs`` may have any broadcastable shape; channels, if present,
    become the trailing axis of the result. Computation is float64.
    """
    img = require_image(img)
    h, w = img.shape[:2]
    ys = np.clip(np.asarray(ys, dtype=np.float64), 0.0, h - 1.0)
    xs = np.clip(np.asarray(xs, dtype=np.float64), 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = ys - y0
    fx = xs - x0
    if img.ndim == 3:
        fy = fy[..., None]
        fx = fx[..., None]
    src = img.astype(np.float64, copy=False)
    top = src[y0, x0] * (1.0 - fx) + src[y0, x1] * fx
    bot = src[y1, x0] * (1.0 - fx) + src[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def rigid_inverse_coords(shape, angle_deg: float, scale: float, center=None):
    """Source (row, col) coordinates that map onto each output pixel."""
    h, w = shape[:2]
    if center is None:
        center = ((h - 1) / 2.0, (w - 1) / 2.0)
    cy, cx = float(center[0]), float(center[1])
    t = np.deg2rad(angle_deg)
    ct, st = np.cos(t), np.sin(t)
    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    dy = yy - cy
    dx = xx - cx
    # inverse of: rotate (row, col) offsets by angle, then scale
    sy = (ct * dy + st * dx) / scale + cy
    sx = (-st * dy + ct * dx) / scale + cx
    return sy, sx


def warp_rigid(img: np.ndarray, angle_deg: float, scale: float, center=None):
    """Inverse-mapped bilinear rotation+scale about ``center``.

    Returns ``(warped, valid)`` where ``valid`` marks output pixels whose
    source coordinate fell inside the input raster; invalid pixels are 0.
    A positive angle rotates the +col axis toward the +row axis.
    """
    img = require_image(img)
    if not np.isfinite(scale) or scale <= 0:
        raise ValueError(f"scale must be positive and finite, got {scale}")
    h, w = img.shape[:2]
    sy, sx = rigid_inverse_coords(img.shape, angle_deg, scale, center)
    valid = (sy >= 0.0) & (sy <= h - 1.0) & (sx >= 0.0) & (sx <= w - 1.0)
    out = bilinear_gather(img, sy, sx)
    out[~valid] = 0.0
    return out.astype(np.float32), valid


def gaussian_noise(img: np.ndarray, sigma: float, seed: int = 0) -> np.ndarray:
    """Add zero-mean Gaussian noise (std in [0,1] units) and clamp."""
    img = require_image(img)
    if not np.isfinite(sigma) or sigma < 0:
        raise ValueError(f"noise sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return np.asarray(img, dtype=np.float32)
    rng = make_rng(seed, STREAM_NOISE)
    noisy = img.astype(np.float64) + rng.normal(0.0, sigma, size=img.shape)
    return np.clip(noisy, 0.0, 1.0).astype(np.float32)


def _to_pil(img: np.ndarray) -> Image.Image:
    img = require_image(img)
    arr8 = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    if arr8.ndim == 3 and arr8.shape[2] == 1:
        arr8 = arr8[:, :, 0]
    mode = "L" if arr8.ndim == 2 else "RGB"
    return Image.fromarray(arr8, mode=mode)


def _from_pil(im: Image.Image) -> np.ndarray:
    if im.mode == "L":
        arr = np.asarray(im, dtype=np.float32) / 255.0
    else:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    return arr


def jpeg_roundtrip(img: np.ndarray, quality: int) -> np.ndarray:
    """Encode/decode through a baseline JPEG codec at the given quality."""
    quality = int(quality)
    if not 1 <= quality <= 100:
        raise ValueError(f"jpeg quality must be in [1, 100], got {quality}")
    buf = io.BytesIO()
    _to_pil(img).save(buf, format="JPEG", quality=quality)
    buf.seek(0)
    out = _from_pil(Image.open(buf))
    if np.asarray(img).ndim == 2:
        return as_gray(out)
    return out


def apply_attack(img: np.ndarray, attack: str, seed: int = 0) -> np.ndarray:
    """Apply a degradation given as ``none``, ``jpeg:Q`` or ``noise:SIGMA``."""
    attack = attack.strip()
    if attack == "none":
        return np.asarray(require_image(img), dtype=np.float32)
    kind, sep, param = attack.partition(":")
    if not sep:
        raise ValueError(f"malformed attack spec {attack!r} (expected kind:param)")
    if kind == "jpeg":
        return jpeg_roundtrip(img, int(param))
    if kind == "noise":
        return gaussian_noise(img, float(param), seed=seed)
    raise ValueError(f"unknown attack kind {kind!r}")


def load_image(path) -> np.ndarray:
    """Read PNG/JPEG into float32 [0,1]; single-channel stays (H, W)."""
    with Image.open(path) as im:
        im.load()
        return _from_pil(im)


def save_image(path, img: np.ndarray) -> None:
    """Write a float image as 8-bit PNG (atomic)."""
    buf = io.BytesIO()
    _to_pil(img).save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())
