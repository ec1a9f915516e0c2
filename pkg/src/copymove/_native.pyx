# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: candidate scoring and disk-fit errors.

Contracts match copymove._kernels_py; that module is the fallback when
this extension is not built.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, floor, sqrt

cnp.import_array()

DEF PENALTY = -1e30


def score_candidates(float[:, :, :, ::1] maps, float[:, :, :, ::1] cands,
                     bint cross_scale, double min_norm):
    cdef Py_ssize_t s = maps.shape[0]
    cdef Py_ssize_t h = maps.shape[1]
    cdef Py_ssize_t w = maps.shape[2]
    cdef Py_ssize_t c = maps.shape[3]
    cdef Py_ssize_t k = cands.shape[0]
    if s != 3:
        raise ValueError("expected 3 scale maps")
    if cands.shape[1] != h or cands.shape[2] != w:
        raise ValueError("candidate grid does not match feature maps")
    out_arr = np.empty((k, h, w), dtype=np.float32)
    cdef float[:, :, ::1] out = out_arr
    cdef Py_ssize_t ki, i, j, m, ci, y0, x0, y1, x1, mlo, mhi
    cdef double dy, dx, ty, tx, fy, fx, w00, w01, w10, w11
    cdef double t, d0, d1, d2, best, nn2
    cdef double mn2 = min_norm * min_norm
    if cross_scale:
        mlo = 0
        mhi = 3
    else:
        mlo = 1
        mhi = 2
    with nogil:
        for ki in range(k):
            for i in range(h):
                for j in range(w):
                    dy = cands[ki, i, j, 0]
                    dx = cands[ki, i, j, 1]
                    if min_norm > 0.0:
                        nn2 = dy * dy + dx * dx
                        if nn2 < mn2:
                            out[ki, i, j] = PENALTY
                            continue
                    ty = i + dy
                    tx = j + dx
                    if ty < 0.0:
                        ty = 0.0
                    elif ty > h - 1.0:
                        ty = h - 1.0
                    if tx < 0.0:
                        tx = 0.0
                    elif tx > w - 1.0:
                        tx = w - 1.0
                    y0 = <Py_ssize_t>ty
                    x0 = <Py_ssize_t>tx
                    if y0 > h - 2 and h > 1:
                        y0 = h - 2
                    if x0 > w - 2 and w > 1:
                        x0 = w - 2
                    y1 = y0 + 1 if y0 + 1 < h else y0
                    x1 = x0 + 1 if x0 + 1 < w else x0
                    fy = ty - y0
                    fx = tx - x0
                    w00 = (1.0 - fy) * (1.0 - fx)
                    w01 = (1.0 - fy) * fx
                    w10 = fy * (1.0 - fx)
                    w11 = fy * fx
                    best = -1e300
                    for m in range(mlo, mhi):
                        d0 = 0.0
                        d1 = 0.0
                        d2 = 0.0
                        for ci in range(c):
                            t = (w00 * maps[m, y0, x0, ci] + w01 * maps[m, y0, x1, ci]
                                 + w10 * maps[m, y1, x0, ci] + w11 * maps[m, y1, x1, ci])
                            if cross_scale:
                                d0 += fabs(maps[0, i, j, ci] - t)
                                d1 += fabs(maps[1, i, j, ci] - t)
                                d2 += fabs(maps[2, i, j, ci] - t)
                            else:
                                d1 += fabs(maps[1, i, j, ci] - t)
                        if cross_scale:
                            if -d0 > best:
                                best = -d0
                            if -d2 > best:
                                best = -d2
                        if -d1 > best:
                            best = -d1
                    out[ki, i, j] = <float>best
    return out_arr


def dlf_fit_errors(float[:, :, ::1] field, radii, double sentinel):
    cdef Py_ssize_t h = field.shape[0]
    cdef Py_ssize_t w = field.shape[1]
    radii_arr = np.asarray(radii, dtype=np.int64)
    cdef long[::1] rads = np.ascontiguousarray(radii_arr)
    cdef Py_ssize_t nr = rads.shape[0]
    out_arr = np.empty((h, w, nr), dtype=np.float32)
    cdef float[:, :, ::1] out = out_arr

    # per-row prefix sums of the 14 accumulated quantities
    prefix_arr = np.empty((14, h, w + 1), dtype=np.float64)
    cdef double[:, :, ::1] prefix = prefix_arr
    cdef Py_ssize_t i, j, q, ri, dy, y, xlo, xhi, hw
    cdef double xg, yg, u, v, acc
    cdef double cx0 = (w - 1) / 2.0
    cdef double cy0 = (h - 1) / 2.0
    cdef double s1, sx, sy, sxx, syy, sxy, su, sv, sxu, syu, sxv, syv, suu, svv
    cdef double n, lx, ly, lxx, lyy, lxy, lxu, lyu, lxv, lyv
    cdef double c00, c01, c02, c11, c12, c22, det, scale, eps
    cdef double t0, t1, t2, ssr_u, ssr_v, x0g, y0g
    cdef long radius
    cdef Py_ssize_t maxr = 0

    with nogil:
        for i in range(h):
            yg = i - cy0
            for q in range(14):
                prefix[q, i, 0] = 0.0
            for j in range(w):
                xg = j - cx0
                u = field[i, j, 0]
                v = field[i, j, 1]
                prefix[0, i, j + 1] = prefix[0, i, j] + 1.0
                prefix[1, i, j + 1] = prefix[1, i, j] + xg
                prefix[2, i, j + 1] = prefix[2, i, j] + yg
                prefix[3, i, j + 1] = prefix[3, i, j] + xg * xg
                prefix[4, i, j + 1] = prefix[4, i, j] + yg * yg
                prefix[5, i, j + 1] = prefix[5, i, j] + xg * yg
                prefix[6, i, j + 1] = prefix[6, i, j] + u
                prefix[7, i, j + 1] = prefix[7, i, j] + v
                prefix[8, i, j + 1] = prefix[8, i, j] + xg * u
                prefix[9, i, j + 1] = prefix[9, i, j] + yg * u
                prefix[10, i, j + 1] = prefix[10, i, j] + xg * v
                prefix[11, i, j + 1] = prefix[11, i, j] + yg * v
                prefix[12, i, j + 1] = prefix[12, i, j] + u * u
                prefix[13, i, j + 1] = prefix[13, i, j] + v * v

    for ri in range(nr):
        if rads[ri] > maxr:
            maxr = rads[ri]
    half_arr = np.empty((nr, 2 * maxr + 1), dtype=np.int64)
    cdef long[:, ::1] half = half_arr
    for ri in range(nr):
        radius = rads[ri]
        for dy in range(-radius, radius + 1):
            half[ri, dy + radius] = <long>floor(sqrt(<double>(radius * radius - dy * dy) + 1e-12))

    with nogil:
        for ri in range(nr):
            radius = rads[ri]
            for i in range(h):
                y0g = i - cy0
                for j in range(w):
                    x0g = j - cx0
                    s1 = sx = sy = sxx = syy = sxy = 0.0
                    su = sv = sxu = syu = sxv = syv = suu = svv = 0.0
                    for dy in range(-radius, radius + 1):
                        y = i + dy
                        if y < 0 or y >= h:
                            continue
                        hw = half[ri, dy + radius]
                        xlo = j - hw
                        if xlo < 0:
                            xlo = 0
                        xhi = j + hw + 1
                        if xhi > w:
                            xhi = w
                        if xhi <= xlo:
                            continue
                        s1 += prefix[0, y, xhi] - prefix[0, y, xlo]
                        sx += prefix[1, y, xhi] - prefix[1, y, xlo]
                        sy += prefix[2, y, xhi] - prefix[2, y, xlo]
                        sxx += prefix[3, y, xhi] - prefix[3, y, xlo]
                        syy += prefix[4, y, xhi] - prefix[4, y, xlo]
                        sxy += prefix[5, y, xhi] - prefix[5, y, xlo]
                        su += prefix[6, y, xhi] - prefix[6, y, xlo]
                        sv += prefix[7, y, xhi] - prefix[7, y, xlo]
                        sxu += prefix[8, y, xhi] - prefix[8, y, xlo]
                        syu += prefix[9, y, xhi] - prefix[9, y, xlo]
                        sxv += prefix[10, y, xhi] - prefix[10, y, xlo]
                        syv += prefix[11, y, xhi] - prefix[11, y, xlo]
                        suu += prefix[12, y, xhi] - prefix[12, y, xlo]
                        svv += prefix[13, y, xhi] - prefix[13, y, xlo]
                    n = s1
                    lx = sx - x0g * s1
                    ly = sy - y0g * s1
                    lxx = sxx - 2.0 * x0g * sx + x0g * x0g * s1
                    lyy = syy - 2.0 * y0g * sy + y0g * y0g * s1
                    lxy = sxy - x0g * sy - y0g * sx + x0g * y0g * s1
                    lxu = sxu - x0g * su
                    lyu = syu - y0g * su
                    lxv = sxv - x0g * sv
                    lyv = syv - y0g * sv
                    c00 = lyy * n - ly * ly
                    c01 = ly * lx - lxy * n
                    c02 = lxy * ly - lyy * lx
                    det = lxx * c00 + lxy * c01 + lx * c02
                    c11 = lxx * n - lx * lx
                    c12 = lxy * lx - lxx * ly
                    c22 = lxx * lyy - lxy * lxy
                    scale = fabs(lxx * c00) + fabs(lxy * c01) + fabs(lx * c02)
                    if n < 6.0 or det <= 1e-12 * (scale + 1e-300):
                        out[i, j, ri] = <float>sentinel
                        continue
                    t0 = (c00 * lxu + c01 * lyu + c02 * su) / det
                    t1 = (c01 * lxu + c11 * lyu + c12 * su) / det
                    t2 = (c02 * lxu + c12 * lyu + c22 * su) / det
                    ssr_u = suu - (t0 * lxu + t1 * lyu + t2 * su)
                    if ssr_u < 0.0:
                        ssr_u = 0.0
                    t0 = (c00 * lxv + c01 * lyv + c02 * sv) / det
                    t1 = (c01 * lxv + c11 * lyv + c12 * sv) / det
                    t2 = (c02 * lxv + c12 * lyv + c22 * sv) / det
                    ssr_v = svv - (t0 * lxv + t1 * lyv + t2 * sv)
                    if ssr_v < 0.0:
                        ssr_v = 0.0
                    eps = (ssr_u + ssr_v) / (2.0 * n)
                    out[i, j, ri] = <float>eps
    return out_arr
