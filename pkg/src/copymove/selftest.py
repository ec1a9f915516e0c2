"""Built-in quick sanity checks for the installed package (CLI `selftest`)."""

import numpy as np

from .config import RunConfig
from .dlf import dlf_errors
from .features import zernike_basis, zernike_features
from .forgegen import ForgerySpec, generate
from .imgproc import resize
from .kernels import BACKEND
from .metrics import binary_metrics
from .patchmatch import first_order_candidates, soft_select
from .pipeline import run_detector
from .synthimage import textured_image


def _check_resize_identity():
    img = textured_image(1, 40, 40, channels=1)
    return np.array_equal(resize(img, 1.0), img)


def _check_zernike_constant():
    basis = zernike_basis(8)
    fm = zernike_features(np.full((21, 21), 0.5, dtype=np.float32), basis)
    return abs(fm[10, 10, 0] - 0.5 * basis.dc_gain) < 1e-5 and np.all(fm[10, 10, 1:] < 1e-5)


def _check_soft_argmax():
    cands = np.arange(34, dtype=np.float32).reshape(17, 1, 1, 2)
    scores = np.full((17, 1, 1), -10.0, dtype=np.float32)
    scores[5] = 0.0
    sel = soft_select(cands, scores, beta=100.0)
    return np.allclose(sel[0, 0], cands[5, 0, 0], atol=1e-5)


def _check_first_order_affine():
    yy, xx = np.mgrid[0:12, 0:12].astype(np.float32)
    field = np.stack([0.25 * xx + 1.0, -0.125 * yy + 2.0], axis=-1)
    cands = first_order_candidates(field)
    return np.allclose(cands[:, 2:-2, 2:-2], field[2:-2, 2:-2], atol=1e-5)


def _check_dlf_affine():
    yy, xx = np.mgrid[0:48, 0:48].astype(np.float32)
    field = np.stack([0.0625 * xx - 0.25 * yy + 3.0, 0.125 * yy + 1.0], axis=-1)
    return float(dlf_errors(field).max()) <= 1e-10


def _check_end_to_end():
    img = textured_image(7, 160, 160)
    spec = ForgerySpec(vertices=(6, 6), area_frac=(0.05, 0.05), angle=(0, 0), scale=(1, 1), regions=(1, 1), seed=3)
    forged, truth, _ = generate(img, spec)
    result = run_detector(forged, RunConfig(seed=5))
    return binary_metrics(result.mask, truth.binary()).f1 >= 0.5


_CHECKS = [
    ("resize identity", _check_resize_identity),
    ("zernike constant response", _check_zernike_constant),
    ("soft argmax saturation", _check_soft_argmax),
    ("first-order affine exactness", _check_first_order_affine),
    ("dlf affine exactness", _check_dlf_affine),
    ("end-to-end translation forgery", _check_end_to_end),
]


def run() -> bool:
    print(f"kernel backend: {BACKEND}")
    ok = True
    for name, fn in _CHECKS:
        try:
            passed = fn()
        except Exception as exc:  # report, keep going
            print(f"[FAIL] {name}: {exc}")
            ok = False
            continue
        print(f"[{'PASS' if passed else 'FAIL'}] {name}")
        ok = ok and passed
    return ok
