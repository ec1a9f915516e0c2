"""Dense linear fitting of offset fields.

For each pixel and each radius, both offset components are least-squares
fit with an affine model d ~ a*x + b*y + c over the closed disk of that
radius (border-truncated), and the mean squared residual pooled over both
components is reported. Copy-move regions move coherently, so their
offsets are locally affine and fit almost exactly; chaotic background
offsets do not. This is the pipeline's separability signal.

The fits are evaluated with sliding-window sums (per-row prefix sums, cost
about O(radius) per pixel per radius) in the kernel backends; see
``copymove.kernels``.
"""

import numpy as np

from . import kernels

DEFAULT_RADII = (7, 9, 11)

# assigned where a neighborhood has < 6 samples or a degenerate fit
FIT_ERROR_SENTINEL = np.float32(1.0e6)


def dlf_errors(field: np.ndarray, radii=DEFAULT_RADII) -> np.ndarray:
    """Fitting-error maps, one channel per radius: (H, W, len(radii)) float32."""
    field = np.ascontiguousarray(field, dtype=np.float32)
    if field.ndim != 3 or field.shape[2] != 2:
        raise ValueError(f"expected (H, W, 2) offset field, got {field.shape}")
    if not np.all(np.isfinite(field)):
        raise ValueError("offset field contains non-finite values")
    h, w = field.shape[:2]
    radii = tuple(int(r) for r in radii)
    if not radii:
        raise ValueError("need at least one radius")
    for r in radii:
        if r < 1:
            raise ValueError(f"radius must be positive, got {r}")
        if r > min(h, w) / 2:
            raise ValueError(f"radius {r} too large for a {h}x{w} field")
    return kernels.dlf_fit_errors(field, radii, float(FIT_ERROR_SENTINEL))
