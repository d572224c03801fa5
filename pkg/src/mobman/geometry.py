"""SE(3)/SO(3) types and maps: exp, log, pose error, interpolation.

Rotations are stored as unit quaternions (w, x, y, z) with the canonical
sign w >= 0; rotation matrices are derived on demand. All twists are
(linear, angular) 6-vectors; pose errors are expressed in the body frame
of the first argument.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import quat_from_rotvec, quat_mul, quat_rotate, rotvec_from_quat

ROTATION_LOG_LIMIT = np.pi - 1e-6


class SingularRotationError(ValueError):
    """Rotation angle at or beyond pi - 1e-6: log map ill-conditioned."""


def _canonical(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if n == 0.0 or not np.isfinite(n):
        raise ValueError(f"invalid quaternion {q}")
    # Idempotent: an already-unit quaternion passes through bit-exactly, so
    # serialize -> deserialize round-trips do not perturb the last ulp.
    if abs(n - 1.0) > 1e-9:
        q = q / n
    if q[0] < 0.0:
        q = -q
    return q


@dataclass(frozen=True)
class Rotation:
    """Unit quaternion with canonical sign w >= 0."""

    wxyz: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self):
        object.__setattr__(self, "wxyz", _canonical(self.wxyz))

    @staticmethod
    def identity() -> "Rotation":
        return Rotation()

    @staticmethod
    def from_rotvec(rotvec) -> "Rotation":
        return Rotation(quat_from_rotvec(np.asarray(rotvec, dtype=float)))

    @staticmethod
    def about_z(angle: float) -> "Rotation":
        return Rotation.from_rotvec([0.0, 0.0, angle])

    def as_rotvec(self) -> np.ndarray:
        return rotvec_from_quat(self.wxyz)

    def as_matrix(self) -> np.ndarray:
        w, x, y, z = self.wxyz
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )

    @property
    def angle(self) -> float:
        s = np.linalg.norm(self.wxyz[1:])
        return 2.0 * np.arctan2(s, self.wxyz[0])

    def compose(self, other: "Rotation") -> "Rotation":
        return Rotation(quat_mul(self.wxyz, other.wxyz))

    def __matmul__(self, other: "Rotation") -> "Rotation":
        return self.compose(other)

    def inverse(self) -> "Rotation":
        w, x, y, z = self.wxyz
        return Rotation(np.array([w, -x, -y, -z]))

    def apply(self, v) -> np.ndarray:
        return quat_rotate(self.wxyz, np.asarray(v, dtype=float))

    def approx_equal(self, other: "Rotation", tol: float = 1e-9) -> bool:
        return bool(np.allclose(self.wxyz, other.wxyz, atol=tol))


@dataclass(frozen=True)
class Pose:
    """Rigid transform: rotation then translation (meters)."""

    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rotation: Rotation = field(default_factory=Rotation)

    def __post_init__(self):
        t = np.asarray(self.translation, dtype=float)
        if t.shape != (3,) or not np.all(np.isfinite(t)):
            raise ValueError(f"invalid translation {t}")
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "Pose":
        return Pose()

    @staticmethod
    def from_pos_quat(pos, wxyz) -> "Pose":
        return Pose(np.asarray(pos, dtype=float), Rotation(np.asarray(wxyz, dtype=float)))

    def compose(self, other: "Pose") -> "Pose":
        return Pose(
            self.translation + self.rotation.apply(other.translation),
            self.rotation.compose(other.rotation),
        )

    def __matmul__(self, other: "Pose") -> "Pose":
        return self.compose(other)

    def inverse(self) -> "Pose":
        rinv = self.rotation.inverse()
        return Pose(-rinv.apply(self.translation), rinv)

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation.as_matrix()
        m[:3, 3] = self.translation
        return m

    def approx_equal(self, other: "Pose", tol: float = 1e-9) -> bool:
        return bool(np.allclose(self.translation, other.translation, atol=tol)) and self.rotation.approx_equal(
            other.rotation, tol
        )


@dataclass(frozen=True)
class Twist:
    """Body-frame twist: linear (m or m/s) and angular (rad or rad/s)."""

    linear: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        lin = np.asarray(self.linear, dtype=float)
        ang = np.asarray(self.angular, dtype=float)
        if lin.shape != (3,) or ang.shape != (3,) or not (np.all(np.isfinite(lin)) and np.all(np.isfinite(ang))):
            raise ValueError("twist components must be finite 3-vectors")
        object.__setattr__(self, "linear", lin)
        object.__setattr__(self, "angular", ang)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.linear, self.angular])

    @staticmethod
    def from_vector(v) -> "Twist":
        v = np.asarray(v, dtype=float)
        return Twist(v[:3], v[3:6])


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


def so3_exp(rotvec) -> Rotation:
    """Rotation by ||rotvec|| about rotvec; Taylor fallback below 1e-8."""
    return Rotation.from_rotvec(rotvec)


def so3_log(r: Rotation) -> np.ndarray:
    return r.as_rotvec()


def se3_exp(twist: Twist) -> Pose:
    w = twist.angular
    theta = np.linalg.norm(w)
    K = _skew(w)
    t2 = theta * theta
    if theta < 1e-2:
        # series: (1-cos)/t^2 and (t-sin)/t^3 cancel catastrophically here
        a = 0.5 - t2 / 24.0 + t2 * t2 / 720.0
        b = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0
    else:
        a = (1.0 - np.cos(theta)) / t2
        b = (theta - np.sin(theta)) / (t2 * theta)
    V = np.eye(3) + a * K + b * (K @ K)
    return Pose(V @ twist.linear, Rotation.from_rotvec(w))


def se3_log(p: Pose) -> Twist:
    """Body twist whose exponential is p; raises near the pi singularity."""
    angle = p.rotation.angle
    if angle >= ROTATION_LOG_LIMIT:
        raise SingularRotationError(f"rotation angle {angle:.6f} too close to pi")
    w = p.rotation.as_rotvec()
    theta = np.linalg.norm(w)
    K = _skew(w)
    t2 = theta * theta
    if theta < 1e-2:
        # series for (1 - (t/2)cot(t/2)) / t^2, stable near identity
        coef = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    else:
        coef = (1.0 - 0.5 * theta * np.sin(theta) / (1.0 - np.cos(theta))) / t2
    Vinv = np.eye(3) - 0.5 * K + coef * (K @ K)
    return Twist(Vinv @ p.translation, w)


def pose_error(current: Pose, target: Pose) -> Twist:
    """Body-frame twist taking current to target: log(current^-1 target).

    Identical poses give the exact zero twist (no roundoff residue), which
    downstream convergence checks rely on.
    """
    if np.array_equal(current.translation, target.translation) and np.array_equal(
        current.rotation.wxyz, target.rotation.wxyz
    ):
        return Twist()
    return se3_log(current.inverse() @ target)


def slerp(a: Rotation, b: Rotation, s: float) -> Rotation:
    qa, qb = a.wxyz, b.wxyz
    dot = float(np.dot(qa, qb))
    if dot < 0.0:
        qb, dot = -qb, -dot
    if dot > 1.0 - 1e-12:
        return Rotation(qa + s * (qb - qa))
    theta = np.arccos(min(dot, 1.0))
    return Rotation((np.sin((1 - s) * theta) * qa + np.sin(s * theta) * qb) / np.sin(theta))


def interpolate_pose(a: Pose, b: Pose, s: float) -> Pose:
    """Linear translation, shortest-arc rotation interpolation for s in [0, 1]."""
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"interpolation fraction {s} outside [0, 1]")
    if s == 0.0:
        return a
    if s == 1.0:
        return b
    return Pose((1.0 - s) * a.translation + s * b.translation, slerp(a.rotation, b.rotation, s))
