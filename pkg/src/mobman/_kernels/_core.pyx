# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of mobman._kernels.pure; same contracts, same results.

Kept in exact numerical lockstep with the pure implementations (identical
operation order) so the parity tests can require bit-level agreement.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport atan2, cos, fabs, sin, sqrt

cnp.import_array()

DEF SMALL_ANGLE = 1e-8


def quat_mul(a, b):
    cdef double[:] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:] bv = np.ascontiguousarray(b, dtype=np.float64)
    out = np.empty(4, dtype=np.float64)
    cdef double[:] o = out
    o[0] = av[0] * bv[0] - av[1] * bv[1] - av[2] * bv[2] - av[3] * bv[3]
    o[1] = av[0] * bv[1] + av[1] * bv[0] + av[2] * bv[3] - av[3] * bv[2]
    o[2] = av[0] * bv[2] - av[1] * bv[3] + av[2] * bv[0] + av[3] * bv[1]
    o[3] = av[0] * bv[3] + av[1] * bv[2] - av[2] * bv[1] + av[3] * bv[0]
    return out


def quat_rotate(q, v):
    cdef double[:] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef double[:] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef double ux = qv[1], uy = qv[2], uz = qv[3], w = qv[0]
    cdef double tx = 2.0 * (uy * vv[2] - uz * vv[1])
    cdef double ty = 2.0 * (uz * vv[0] - ux * vv[2])
    cdef double tz = 2.0 * (ux * vv[1] - uy * vv[0])
    out = np.empty(3, dtype=np.float64)
    cdef double[:] o = out
    o[0] = vv[0] + w * tx + (uy * tz - uz * ty)
    o[1] = vv[1] + w * ty + (uz * tx - ux * tz)
    o[2] = vv[2] + w * tz + (ux * ty - uy * tx)
    return out


def quat_from_rotvec(v):
    cdef double[:] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef double angle = sqrt(vv[0] * vv[0] + vv[1] * vv[1] + vv[2] * vv[2])
    cdef double scale, w
    if angle < SMALL_ANGLE:
        scale = 0.5 - angle * angle / 48.0
        w = 1.0 - angle * angle / 8.0
    else:
        scale = sin(0.5 * angle) / angle
        w = cos(0.5 * angle)
    out = np.empty(4, dtype=np.float64)
    cdef double[:] o = out
    o[0] = w
    o[1] = vv[0] * scale
    o[2] = vv[1] * scale
    o[3] = vv[2] * scale
    cdef int i
    if o[0] < 0.0:
        for i in range(4):
            o[i] = -o[i]
    cdef double n = sqrt(o[0] * o[0] + o[1] * o[1] + o[2] * o[2] + o[3] * o[3])
    for i in range(4):
        o[i] = o[i] / n
    return out


def rotvec_from_quat(q):
    cdef double[:] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef double w = qv[0], x = qv[1], y = qv[2], z = qv[3]
    if w < 0.0:
        w = -w
        x = -x
        y = -y
        z = -z
    cdef double s = sqrt(x * x + y * y + z * z)
    cdef double scale
    if s < SMALL_ANGLE:
        scale = 2.0 / w - 2.0 * s * s / (3.0 * w * w * w)
    else:
        scale = 2.0 * atan2(s, w) / s
    out = np.empty(3, dtype=np.float64)
    cdef double[:] o = out
    o[0] = scale * x
    o[1] = scale * y
    o[2] = scale * z
    return out


def segment_closest_points(p1, d1, p2, d2):
    cdef double[:] p1v = np.ascontiguousarray(p1, dtype=np.float64)
    cdef double[:] d1v = np.ascontiguousarray(d1, dtype=np.float64)
    cdef double[:] p2v = np.ascontiguousarray(p2, dtype=np.float64)
    cdef double[:] d2v = np.ascontiguousarray(d2, dtype=np.float64)
    cdef double rx = p1v[0] - p2v[0], ry = p1v[1] - p2v[1], rz = p1v[2] - p2v[2]
    cdef double a = d1v[0] * d1v[0] + d1v[1] * d1v[1] + d1v[2] * d1v[2]
    cdef double e = d2v[0] * d2v[0] + d2v[1] * d2v[1] + d2v[2] * d2v[2]
    cdef double f = d2v[0] * rx + d2v[1] * ry + d2v[2] * rz
    cdef double s = 0.0, t = 0.0, c, b, denom
    if a <= 1e-18 and e <= 1e-18:
        s = 0.0
        t = 0.0
    elif a <= 1e-18:
        s = 0.0
        t = f / e
        t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
    else:
        c = d1v[0] * rx + d1v[1] * ry + d1v[2] * rz
        if e <= 1e-18:
            t = 0.0
            s = -c / a
            s = 0.0 if s < 0.0 else (1.0 if s > 1.0 else s)
        else:
            b = d1v[0] * d2v[0] + d1v[1] * d2v[1] + d1v[2] * d2v[2]
            denom = a * e - b * b
            if denom > 1e-14 * a * e:
                s = (b * f - c * e) / denom
                s = 0.0 if s < 0.0 else (1.0 if s > 1.0 else s)
            else:
                s = 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = -c / a
                s = 0.0 if s < 0.0 else (1.0 if s > 1.0 else s)
            elif t > 1.0:
                t = 1.0
                s = (b - c) / a
                s = 0.0 if s < 0.0 else (1.0 if s > 1.0 else s)
    c1 = np.empty(3, dtype=np.float64)
    c2 = np.empty(3, dtype=np.float64)
    cdef double[:] c1v = c1
    cdef double[:] c2v = c2
    cdef int i
    for i in range(3):
        c1v[i] = p1v[i] + s * d1v[i]
        c2v[i] = p2v[i] + t * d2v[i]
    return c1, c2
