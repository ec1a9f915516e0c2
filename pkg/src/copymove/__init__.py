"""Copy-move forgery localization via cross-scale PatchMatch.

Pipeline: scale pyramid -> per-pixel descriptor fields (Zernike moment
magnitudes, optional conv features) -> cross-scale PatchMatch offset field
-> dense linear fitting error maps -> rule-based mask decoding. Plus a
synthetic forgery generator and an evaluation harness.
"""

__version__ = "0.1.0"

from .config import RunConfig
from .dlf import FIT_ERROR_SENTINEL, dlf_errors
from .features import (
    ConvWeights,
    FeaturePyramid,
    ZernikeBasis,
    conv_features,
    feature_pyramid,
    load_conv_weights,
    random_conv_weights,
    save_conv_weights,
    zernike_basis,
    zernike_extractor,
    zernike_features,
)
from .forgegen import ForgerySpec, generate, generate_corpus
from .imgproc import (
    ScalePyramid,
    apply_attack,
    build_pyramid,
    load_image,
    resize,
    save_image,
    to_grayscale,
    warp_rigid,
)
from .kernels import BACKEND
from .maskgen import ClassMask, DecoderConfig, decode_mask, mirror_residual, overlay
from .metrics import EvalMetrics, binary_metrics, evaluate_dirs, three_class_metrics
from .patchmatch import (
    PmConfig,
    bilinear_sample,
    dual_field,
    init_offsets,
    run_patchmatch,
    score_cross_scale,
    soft_select,
)
from .pipeline import DetectionResult, run_detector
from .synthimage import textured_image

__all__ = [
    "BACKEND",
    "ClassMask",
    "ConvWeights",
    "DecoderConfig",
    "DetectionResult",
    "EvalMetrics",
    "FIT_ERROR_SENTINEL",
    "FeaturePyramid",
    "ForgerySpec",
    "PmConfig",
    "RunConfig",
    "ScalePyramid",
    "ZernikeBasis",
    "apply_attack",
    "bilinear_sample",
    "binary_metrics",
    "build_pyramid",
    "conv_features",
    "decode_mask",
    "dlf_errors",
    "dual_field",
    "evaluate_dirs",
    "feature_pyramid",
    "generate",
    "generate_corpus",
    "init_offsets",
    "load_conv_weights",
    "load_image",
    "mirror_residual",
    "overlay",
    "random_conv_weights",
    "resize",
    "run_detector",
    "run_patchmatch",
    "save_conv_weights",
    "save_image",
    "score_cross_scale",
    "soft_select",
    "textured_image",
    "three_class_metrics",
    "to_grayscale",
    "warp_rigid",
    "zernike_basis",
    "zernike_extractor",
    "zernike_features",
]
