"""Pure-numpy reference implementations of the hot numeric kernels.

The compiled extension (``mobman._kernels._core``) mirrors these functions
exactly; parity is enforced by tests/test_kernels.py. Quaternions are
(w, x, y, z) arrays, canonicalized to w >= 0 by the callers that need it.
"""

import math

import numpy as np

SMALL_ANGLE = 1e-8


def quat_mul(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_rotate(q, v):
    # v' = v + 2w (u x v) + 2 u x (u x v), u = (x, y, z)
    u = q[1:]
    t = 2.0 * np.cross(u, v)
    return v + q[0] * t + np.cross(u, t)


def quat_from_rotvec(v):
    # scalar libm arithmetic, in the exact operation order of the compiled twin
    v0, v1, v2 = float(v[0]), float(v[1]), float(v[2])
    angle = math.sqrt(v0 * v0 + v1 * v1 + v2 * v2)
    if angle < SMALL_ANGLE:
        # sin(a/2)/a = 1/2 - a^2/48 + O(a^4)
        scale = 0.5 - angle * angle / 48.0
        w = 1.0 - angle * angle / 8.0
    else:
        scale = math.sin(0.5 * angle) / angle
        w = math.cos(0.5 * angle)
    q = [w, v0 * scale, v1 * scale, v2 * scale]
    if q[0] < 0.0:
        q = [-c for c in q]
    n = math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    return np.array([q[0] / n, q[1] / n, q[2] / n, q[3] / n])


def rotvec_from_quat(q):
    w, x, y, z = float(q[0]), float(q[1]), float(q[2]), float(q[3])
    if w < 0.0:
        w, x, y, z = -w, -x, -y, -z
    s = math.sqrt(x * x + y * y + z * z)
    if s < SMALL_ANGLE:
        # angle/sin(angle/2) = 2 + s^2/(3 w^2) ... expand around s=0
        scale = 2.0 / w - 2.0 * s * s / (3.0 * w * w * w)
    else:
        scale = 2.0 * math.atan2(s, w) / s
    return np.array([scale * x, scale * y, scale * z])


def segment_closest_points(p1, d1, p2, d2):
    """Closest points between segments [p1, p1+d1] and [p2, p2+d2].

    Returns (c1, c2). Parallel/degenerate cases resolve to the minimizing
    pair with the smallest parameter on segment 1 (deterministic).
    """
    p1x, p1y, p1z = float(p1[0]), float(p1[1]), float(p1[2])
    p2x, p2y, p2z = float(p2[0]), float(p2[1]), float(p2[2])
    d1x, d1y, d1z = float(d1[0]), float(d1[1]), float(d1[2])
    d2x, d2y, d2z = float(d2[0]), float(d2[1]), float(d2[2])
    rx, ry, rz = p1x - p2x, p1y - p2y, p1z - p2z
    a = d1x * d1x + d1y * d1y + d1z * d1z
    e = d2x * d2x + d2y * d2y + d2z * d2z
    f = d2x * rx + d2y * ry + d2z * rz
    s = t = 0.0
    if a <= 1e-18 and e <= 1e-18:
        pass
    elif a <= 1e-18:
        t = min(max(f / e, 0.0), 1.0)
    else:
        c = d1x * rx + d1y * ry + d1z * rz
        if e <= 1e-18:
            s = min(max(-c / a, 0.0), 1.0)
        else:
            b = d1x * d2x + d1y * d2y + d1z * d2z
            denom = a * e - b * b
            if denom > 1e-14 * a * e:
                s = min(max((b * f - c * e) / denom, 0.0), 1.0)
            else:
                s = 0.0  # parallel: pick smallest s among minimizers
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = min(max(-c / a, 0.0), 1.0)
            elif t > 1.0:
                t = 1.0
                s = min(max((b - c) / a, 0.0), 1.0)
    c1 = np.array([p1x + s * d1x, p1y + s * d1y, p1z + s * d1z])
    c2 = np.array([p2x + t * d2x, p2y + t * d2y, p2z + t * d2z])
    return c1, c2
