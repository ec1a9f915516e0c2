"""End-to-end detection: image -> copy-move mask with diagnostics."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import RunConfig
from .dlf import dlf_errors
from .features import (
    conv_extractor,
    feature_pyramid,
    load_conv_weights,
    zernike_basis,
    zernike_extractor,
)
from .imgproc import build_pyramid, require_image
from .maskgen import decode_mask
from .patchmatch import dual_field


@dataclass
class DetectionResult:
    mask: np.ndarray  # (H, W) bool
    field_zm: np.ndarray  # (H, W, 2) float32
    err_zm: np.ndarray  # (H, W, R) float32
    field_conv: Optional[np.ndarray] = None
    err_conv: Optional[np.ndarray] = None

    @property
    def flagged_fraction(self) -> float:
        return float(self.mask.mean())


def run_detector(img: np.ndarray, cfg: RunConfig) -> DetectionResult:
    """Pyramid -> features -> PatchMatch -> DLF -> rule decoder."""
    img = require_image(img)
    cfg.validate()
    pyr = build_pyramid(img)
    basis = zernike_basis(cfg.patch_radius)
    pyr_zm = feature_pyramid(pyr, zernike_extractor(basis))
    pyr_conv = None
    if cfg.conv_weights:
        weights = load_conv_weights(cfg.conv_weights)
        pyr_conv = feature_pyramid(pyr, conv_extractor(weights))
    field_conv, field_zm = dual_field(pyr_zm, pyr_conv, cfg.pm_config())
    err_zm = dlf_errors(field_zm, cfg.dlf_radii)
    families = [(err_zm, field_zm)]
    err_conv = None
    if field_conv is not None:
        err_conv = dlf_errors(field_conv, cfg.dlf_radii)
        families.append((err_conv, field_conv))
    mask = decode_mask(families, cfg.decoder_config())
    return DetectionResult(
        mask=mask, field_zm=field_zm, err_zm=err_zm, field_conv=field_conv, err_conv=err_conv
    )
