"""Pure-numpy implementations of the two hot kernels.

Same contracts as the compiled ``copymove._native`` extension; selected by
``copymove.kernels`` when the extension is unavailable or when
``COPYMOVE_BACKEND=python`` is set. Kept free of Python-level per-pixel
loops, but still several times slower than the native code (see
``benchmarks/compare_backends.py``).
"""

import numpy as np

_PENALTY = np.float32(-1e30)


def score_candidates(maps: np.ndarray, cands: np.ndarray, cross_scale: bool, min_norm: float) -> np.ndarray:
    """Best cross-scale matching score for every candidate offset.

    maps:  (3, H, W, C) float32, scale order (u, o, b)
    cands: (K, H, W, 2) float32 offsets (drow, dcol)
    Score of a candidate is max over scale pairs (n, m) of
    -||maps[n][p] - maps[m][p + cand]||_1 with bilinear sampling of the
    target; single-scale mode uses only the (o, o) pair. Candidates with
    offset norm below ``min_norm`` receive a large negative penalty.
    Sampling positions are clamped to the image bounds.
    """
    maps = np.asarray(maps, dtype=np.float32)
    cands = np.asarray(cands, dtype=np.float32)
    s, h, w, c = maps.shape
    if s != 3:
        raise ValueError("expected 3 scale maps")
    k = cands.shape[0]
    pos_y = np.arange(h, dtype=np.float64)[:, None]
    pos_x = np.arange(w, dtype=np.float64)[None, :]
    pairs_n = range(3) if cross_scale else (1,)
    pairs_m = range(3) if cross_scale else (1,)
    out = np.empty((k, h, w), dtype=np.float32)
    for ki in range(k):
        dy = cands[ki, :, :, 0].astype(np.float64)
        dx = cands[ki, :, :, 1].astype(np.float64)
        ty = np.clip(pos_y + dy, 0.0, h - 1.0)
        tx = np.clip(pos_x + dx, 0.0, w - 1.0)
        y0 = np.minimum(ty.astype(np.intp), h - 2) if h > 1 else ty.astype(np.intp)
        x0 = np.minimum(tx.astype(np.intp), w - 2) if w > 1 else tx.astype(np.intp)
        fy = (ty - y0).astype(np.float32)[:, :, None]
        fx = (tx - x0).astype(np.float32)[:, :, None]
        y1 = np.minimum(y0 + 1, h - 1)
        x1 = np.minimum(x0 + 1, w - 1)
        w00 = (1 - fy) * (1 - fx)
        w01 = (1 - fy) * fx
        w10 = fy * (1 - fx)
        w11 = fy * fx
        best = np.full((h, w), -np.inf, dtype=np.float32)
        for m in pairs_m:
            fm = maps[m]
            samp = w00 * fm[y0, x0] + w01 * fm[y0, x1] + w10 * fm[y1, x0] + w11 * fm[y1, x1]
            for n in pairs_n:
                d = np.abs(maps[n] - samp).sum(axis=2, dtype=np.float32)
                np.maximum(best, -d, out=best)
        if min_norm > 0:
            sub = dy * dy + dx * dx < min_norm * min_norm
            best[sub] = _PENALTY
        out[ki] = best
    return out


def _disk_half_widths(radius: int) -> np.ndarray:
    dy = np.arange(-radius, radius + 1)
    return np.floor(np.sqrt(np.float64(radius * radius) - dy * dy + 1e-12)).astype(np.intp)


def dlf_fit_errors(field: np.ndarray, radii, sentinel: float) -> np.ndarray:
    """Per-pixel affine-fit mean squared residual over disk neighborhoods.

    field: (H, W, 2) float32 offsets; radii: iterable of ints. For each
    pixel and radius, both offset components are least-squares fit with
    d ~ a*x + b*y + c over the border-truncated closed disk; the returned
    (H, W, len(radii)) map holds the mean squared residual pooled over
    both components. Neighborhoods with fewer than 6 samples (or a
    degenerate normal matrix) get ``sentinel``.

    Disk sums come from per-row prefix sums (cost ~ O(radius) per pixel);
    coordinates are globally centered then shifted per pixel, which keeps
    the 3x3 normal systems well conditioned.
    """
    field = np.asarray(field, dtype=np.float32)
    h, w, _ = field.shape
    yg = (np.arange(h, dtype=np.float64) - (h - 1) / 2.0)[:, None]
    xg = (np.arange(w, dtype=np.float64) - (w - 1) / 2.0)[None, :]
    u = field[:, :, 0].astype(np.float64)
    v = field[:, :, 1].astype(np.float64)
    ones = np.ones((h, w), dtype=np.float64)
    quantities = [
        ones, xg * ones, yg * ones, xg * xg * ones, yg * yg * ones, xg * yg * ones,
        u, v, xg * u, yg * u, xg * v, yg * v, u * u, v * v,
    ]
    prefix = np.empty((len(quantities), h, w + 1), dtype=np.float64)
    prefix[:, :, 0] = 0.0
    for qi, q in enumerate(quantities):
        np.cumsum(q, axis=1, out=prefix[qi, :, 1:])

    cols = np.arange(w, dtype=np.intp)
    out = np.empty((h, w, len(tuple(radii))), dtype=np.float32)
    for ri, radius in enumerate(radii):
        radius = int(radius)
        half = _disk_half_widths(radius)
        sums = np.zeros((len(quantities), h, w), dtype=np.float64)
        for dy in range(-radius, radius + 1):
            hw = half[dy + radius]
            lo = np.clip(cols - hw, 0, w)
            hi = np.clip(cols + hw + 1, 0, w)
            ys_dst = slice(max(0, -dy), min(h, h - dy))
            ys_src = slice(max(0, dy), min(h, h + dy))
            sums[:, ys_dst, :] += prefix[:, ys_src, :][:, :, hi] - prefix[:, ys_src, :][:, :, lo]
        (s1, sx, sy, sxx, syy, sxy, su, sv, sxu, syu, sxv, syv, suu, svv) = sums
        # shift global-centered coordinates to be local to each pixel
        x0 = xg * ones
        y0 = yg * ones
        n = s1
        lx = sx - x0 * s1
        ly = sy - y0 * s1
        lxx = sxx - 2 * x0 * sx + x0 * x0 * s1
        lyy = syy - 2 * y0 * sy + y0 * y0 * s1
        lxy = sxy - x0 * sy - y0 * sx + x0 * y0 * s1
        lxu = sxu - x0 * su
        lyu = syu - y0 * su
        lxv = sxv - x0 * sv
        lyv = syv - y0 * sv
        # adjugate solve of [[lxx,lxy,lx],[lxy,lyy,ly],[lx,ly,n]] theta = rhs
        c00 = lyy * n - ly * ly
        c01 = ly * lx - lxy * n
        c02 = lxy * ly - lyy * lx
        det = lxx * c00 + lxy * c01 + lx * c02
        c11 = lxx * n - lx * lx
        c12 = lxy * lx - lxx * ly
        c22 = lxx * lyy - lxy * lxy
        scale = np.abs(lxx * c00) + np.abs(lxy * c01) + np.abs(lx * c02)
        bad = (n < 6) | (det <= 1e-12 * (scale + 1e-300))
        safe_det = np.where(bad, 1.0, det)
        eps = np.zeros((h, w), dtype=np.float64)
        for rhs0, rhs1, rhs2, sqq in ((lxu, lyu, su, suu), (lxv, lyv, sv, svv)):
            t0 = (c00 * rhs0 + c01 * rhs1 + c02 * rhs2) / safe_det
            t1 = (c01 * rhs0 + c11 * rhs1 + c12 * rhs2) / safe_det
            t2 = (c02 * rhs0 + c12 * rhs1 + c22 * rhs2) / safe_det
            ssr = sqq - (t0 * rhs0 + t1 * rhs1 + t2 * rhs2)
            eps += np.maximum(ssr, 0.0)
        eps /= 2.0 * np.maximum(n, 1.0)
        eps[bad] = sentinel
        out[:, :, ri] = eps.astype(np.float32)
    return out
