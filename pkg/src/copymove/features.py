"""Per-pixel descriptor fields.

Two extractor families produce (H, W, D) feature maps:

- Zernike moment magnitudes: order-5 complex moments on a disk of
  ``patch_radius`` pixels, 12 channels for the (n, m) pairs with m >= 0,
  magnitudes only (rotation invariant). Computed for every pixel by
  FFT correlation with precomputed basis kernels; borders use reflect
  padding.
- An inference-only convolutional extractor: five blocks of
  conv -> normalization (stored statistics) -> rectifier, with weights
  loaded from a binary file (format below). No training happens here.

``feature_pyramid`` applies an extractor to the three pyramid scales and
resizes every map back to the base resolution so the matcher sees a single
coordinate frame.

Conv weight file layout (little-endian):
    magic  b"CMW1"
    uint32 block count
    per block:
        uint32 out_channels, uint32 in_channels, uint32 kernel_size
        float32 kernel  [out, in, k, k]
        float32 bias    [out]
        float32 mean    [out]      (normalization running mean)
        float32 var     [out]      (normalization running variance)
        float32 scale   [out]
        float32 shift   [out]
"""

import math
import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft as sfft

from .binio import atomic_write_bytes
from .imgproc import ScalePyramid, as_gray, require_image, resize_to
from .rng import STREAM_WEIGHTS, make_rng

# order-5 (n, m) pairs with m >= 0 and n - m even: exactly 12 channels
ZERNIKE_PAIRS = (
    (0, 0), (1, 1), (2, 0), (2, 2), (3, 1), (3, 3),
    (4, 0), (4, 2), (4, 4), (5, 1), (5, 3), (5, 5),
)

_BN_EPS = 1e-5
_WEIGHTS_MAGIC = b"CMW1"


def _radial_poly(n: int, m: int, rho: np.ndarray) -> np.ndarray:
    out = np.zeros_like(rho)
    for s in range((n - m) // 2 + 1):
        coef = (
            (-1) ** s
            * math.factorial(n - s)
            / (math.factorial(s) * math.factorial((n + m) // 2 - s) * math.factorial((n - m) // 2 - s))
        )
        out += coef * rho ** (n - 2 * s)
    return out


class ZernikeBasis:
    """Precomputed complex projection kernels on the unit disk.

    ``kernels[k]`` holds the weights for channel k: the conjugate basis
    function scaled by (n+1)/pi and the 1/radius^2 area element. All
    non-constant channels are de-meaned inside the disk so a constant
    patch produces exactly zero response outside channel 0;
    ``dc_gain`` is channel 0's response to a unit constant patch.
    """

    def __init__(self, patch_radius: int, pairs=ZERNIKE_PAIRS):
        if patch_radius < 2:
            raise ValueError(f"patch_radius must be >= 2, got {patch_radius}")
        self.patch_radius = int(patch_radius)
        self.pairs = tuple((int(n), int(m)) for n, m in pairs)
        r = self.patch_radius
        d = 2 * r + 1
        dy, dx = np.mgrid[-r : r + 1, -r : r + 1].astype(np.float64)
        rho = np.hypot(dy, dx) / r
        theta = np.arctan2(dy, dx)
        inside = rho <= 1.0
        n_disk = int(inside.sum())
        kernels = np.zeros((len(self.pairs), d, d), dtype=np.complex128)
        for k, (n, m) in enumerate(self.pairs):
            v = _radial_poly(n, m, rho) * np.exp(-1j * m * theta)
            kern = ((n + 1) / np.pi) * v / (r * r)
            kern[~inside] = 0.0
            if (n, m) != (0, 0):
                kern[inside] -= kern[inside].mean()
            kernels[k] = kern
        self.kernels = kernels
        self.inside = inside
        self.dc_gain = float(np.real(kernels[self.pairs.index((0, 0))].sum()))
        self._fft_cache: dict = {}
        # pre-flipped kernels: linear convolution with these realizes correlation
        self._flipped = kernels[:, ::-1, ::-1].copy()
        self._n_disk = n_disk

    @property
    def depth(self) -> int:
        return len(self.pairs)

    def _kernel_ffts(self, shape):
        cached = self._fft_cache.get(shape)
        if cached is None:
            cached = sfft.fft2(self._flipped, s=shape, axes=(-2, -1), workers=-1)
            self._fft_cache[shape] = cached
        return cached


@lru_cache(maxsize=8)
def zernike_basis(patch_radius: int, pairs=ZERNIKE_PAIRS) -> ZernikeBasis:
    """Shared, cached basis (immutable apart from its FFT plan cache)."""
    return ZernikeBasis(patch_radius, pairs)


def zernike_features(gray: np.ndarray, basis: ZernikeBasis) -> np.ndarray:
    """Per-pixel Zernike magnitudes, (H, W, 12) float32.

    Every pixel's centered patch is projected on each basis kernel; border
    pixels see reflect-padded content.
    """
    gray = require_image(gray, channels=1)
    if gray.ndim == 3:
        gray = gray[:, :, 0]
    h, w = gray.shape
    r = basis.patch_radius
    d = 2 * r + 1
    if h < d or w < d:
        raise ValueError(f"image {h}x{w} smaller than the {d}x{d} descriptor patch")
    pad = np.pad(gray.astype(np.float64), r, mode="reflect")
    ly = sfft.next_fast_len(pad.shape[0] + d - 1)
    lx = sfft.next_fast_len(pad.shape[1] + d - 1)
    fimg = sfft.fft2(pad, s=(ly, lx), workers=-1)
    fker = basis._kernel_ffts((ly, lx))
    full = sfft.ifft2(fimg[None] * fker, axes=(-2, -1), workers=-1)
    # crop the 'valid' correlation: output pixel (y, x) aligns with patch center
    crop = full[:, d - 1 : d - 1 + h, d - 1 : d - 1 + w]
    return np.ascontiguousarray(np.moveaxis(np.abs(crop), 0, -1), dtype=np.float32)


@dataclass(frozen=True)
class ConvBlock:
    kernel: np.ndarray  # (out, in, k, k)
    bias: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    scale: np.ndarray
    shift: np.ndarray

    def validate(self, in_channels: int) -> int:
        k = self.kernel
        if k.ndim != 4 or k.shape[2] != k.shape[3]:
            raise ValueError(f"bad kernel shape {k.shape}")
        if k.shape[1] != in_channels:
            raise ValueError(f"kernel expects {k.shape[1]} input channels, got {in_channels}")
        out = k.shape[0]
        for name in ("bias", "mean", "var", "scale", "shift"):
            vec = getattr(self, name)
            if vec.shape != (out,):
                raise ValueError(f"{name} shape {vec.shape} != ({out},)")
            if not np.all(np.isfinite(vec)):
                raise ValueError(f"{name} contains non-finite values")
        if not np.all(np.isfinite(k)):
            raise ValueError("kernel contains non-finite values")
        if np.any(self.var < 0):
            raise ValueError("negative variance in normalization statistics")
        return out


@dataclass(frozen=True)
class ConvWeights:
    blocks: tuple

    def validate(self, in_channels: int) -> int:
        c = in_channels
        for blk in self.blocks:
            c = blk.validate(c)
        return c

    @property
    def in_channels(self) -> int:
        return self.blocks[0].kernel.shape[1]


def save_conv_weights(path, weights: ConvWeights) -> None:
    parts = [_WEIGHTS_MAGIC, struct.pack("<I", len(weights.blocks))]
    for blk in weights.blocks:
        out, cin, k, _ = blk.kernel.shape
        parts.append(struct.pack("<III", out, cin, k))
        for arr in (blk.kernel, blk.bias, blk.mean, blk.var, blk.scale, blk.shift):
            parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    atomic_write_bytes(path, b"".join(parts))


def load_conv_weights(path) -> ConvWeights:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _WEIGHTS_MAGIC:
        raise ValueError(f"{path}: not a conv weight file (bad magic)")
    off = 4
    (count,) = struct.unpack_from("<I", data, off)
    off += 4
    blocks = []
    for _ in range(count):
        out, cin, k = struct.unpack_from("<III", data, off)
        off += 12
        arrs = []
        for size in (out * cin * k * k, out, out, out, out, out):
            end = off + 4 * size
            if end > len(data):
                raise ValueError(f"{path}: truncated weight payload")
            arrs.append(np.frombuffer(data[off:end], dtype="<f4").astype(np.float32))
            off += 4 * size
        blocks.append(
            ConvBlock(
                kernel=arrs[0].reshape(out, cin, k, k),
                bias=arrs[1], mean=arrs[2], var=arrs[3], scale=arrs[4], shift=arrs[5],
            )
        )
    if off != len(data):
        raise ValueError(f"{path}: {len(data) - off} trailing bytes")
    weights = ConvWeights(blocks=tuple(blocks))
    weights.validate(weights.in_channels)
    return weights


def random_conv_weights(seed: int, in_channels: int = 1, channels=(16, 32, 32, 64, 64), ksize: int = 3) -> ConvWeights:
    """He-scaled random weights with identity normalization statistics."""
    rng = make_rng(seed, STREAM_WEIGHTS)
    blocks = []
    cin = in_channels
    for cout in channels:
        fan_in = cin * ksize * ksize
        kern = rng.standard_normal((cout, cin, ksize, ksize)) * np.sqrt(2.0 / fan_in)
        blocks.append(
            ConvBlock(
                kernel=kern.astype(np.float32),
                bias=np.zeros(cout, dtype=np.float32),
                mean=np.zeros(cout, dtype=np.float32),
                var=np.ones(cout, dtype=np.float32),
                scale=np.ones(cout, dtype=np.float32),
                shift=np.zeros(cout, dtype=np.float32),
            )
        )
        cin = cout
    return ConvWeights(blocks=tuple(blocks))


def _conv2d_same(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # zero-padded stride-1 convolution via windowed tensordot, row-chunked
    k = kernel.shape[2]
    p = k // 2
    h, w, _ = x.shape
    xp = np.pad(x, ((p, p), (p, p), (0, 0)))
    out = np.empty((h, w, kernel.shape[0]), dtype=np.float64)
    win = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(0, 1))
    chunk = max(1, int(4e6 // max(w * x.shape[2] * k * k, 1)))
    for y in range(0, h, chunk):
        sl = win[y : y + chunk]
        # sl: (rows, W, C, k, k); kernel: (out, C, k, k)
        out[y : y + chunk] = np.tensordot(sl, kernel, axes=([2, 3, 4], [1, 2, 3]))
    return out


def conv_features(img: np.ndarray, weights: ConvWeights) -> np.ndarray:
    """Forward pass of the conv extractor; output (H, W, C_out) float32."""
    img = require_image(img)
    x = img.astype(np.float64)
    if x.ndim == 2:
        x = x[:, :, None]
    h, w = x.shape[:2]
    weights.validate(x.shape[2])
    for blk in weights.blocks:
        x = _conv2d_same(x, blk.kernel.astype(np.float64)) + blk.bias
        x = (x - blk.mean) / np.sqrt(blk.var.astype(np.float64) + _BN_EPS) * blk.scale + blk.shift
        np.maximum(x, 0.0, out=x)
    if x.shape[:2] != (h, w):
        x = resize_to(x.astype(np.float32), h, w)
    return np.ascontiguousarray(x, dtype=np.float32)


@dataclass(frozen=True)
class FeaturePyramid:
    """Feature maps of the up/base/down scales, all at base resolution."""

    u: np.ndarray
    o: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        if not (self.u.shape == self.o.shape == self.b.shape):
            raise ValueError("pyramid feature maps must share shape")
        for m in (self.u, self.o, self.b):
            if not np.all(np.isfinite(m)):
                raise ValueError("feature map contains non-finite values")

    @property
    def depth(self) -> int:
        return self.o.shape[2]

    def stacked(self) -> np.ndarray:
        """(3, H, W, D) float32, scale order (u, o, b)."""
        return np.ascontiguousarray(np.stack([self.u, self.o, self.b]), dtype=np.float32)


def zernike_extractor(basis: ZernikeBasis):
    """Extractor callable: image -> Zernike magnitude map (grayscale input)."""

    def extract(img: np.ndarray) -> np.ndarray:
        return zernike_features(as_gray(img), basis)

    return extract


def conv_extractor(weights: ConvWeights):
    def extract(img: np.ndarray) -> np.ndarray:
        return conv_features(img, weights)

    return extract


def feature_pyramid(pyr: ScalePyramid, extract) -> FeaturePyramid:
    """Apply an extractor per scale, then resize every map to base H x W."""
    h, w = pyr.base.shape[:2]
    maps = {}
    for name, img in (("u", pyr.up), ("o", pyr.base), ("b", pyr.down)):
        fm = extract(img)
        if fm.shape[:2] != (h, w):
            fm = resize_to(fm, h, w)
        maps[name] = np.ascontiguousarray(fm, dtype=np.float32)
    return FeaturePyramid(**maps)
