"""Closest points, contact normals, and velocity-damper constraint rows.

All primitives reduce to capsules (spheres are zero-length capsules), so
every pairwise query is a segment-segment closest-point problem followed
by radius subtraction. Damper rows bound the approach velocity between a
declared pair so the clearance cannot drop below the safety margin within
one Euler step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import segment_closest_points
from .geometry import Pose
from .model import FrameSet, Geom, RobotModel, forward_kinematics, point_linear_jacobian


@dataclass(frozen=True)
class DamperParams:
    """Velocity-damper tuning: 2 cm margin, 10 cm detection range defaults."""

    d_min: float = 0.02
    detection_range: float = 0.10
    gain: float = 0.85
    relaxation: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.gain <= 1.0:
            raise ValueError("damper gain must be in (0, 1]")
        if self.relaxation < 0.0:
            raise ValueError("damper relaxation must be >= 0")


@dataclass(frozen=True)
class ContactInfo:
    """Signed surface distance with witness points and normal (b toward a)."""

    distance: float
    point_a: np.ndarray
    point_b: np.ndarray
    normal: np.ndarray
    degenerate: bool = False


def _segment(geom: Geom, pose: Pose) -> tuple[np.ndarray, np.ndarray]:
    """World-frame (start, direction) of the capsule center segment."""
    world = pose @ geom.offset
    axis = world.rotation.apply([0.0, 0.0, 1.0])
    start = world.translation - geom.half_length * axis
    return start, 2.0 * geom.half_length * axis


def closest_points(geom_a: Geom, pose_a: Pose, geom_b: Geom, pose_b: Pose) -> ContactInfo:
    """Surface distance (negative when penetrating) between two primitives."""
    sa, da = _segment(geom_a, pose_a)
    sb, db = _segment(geom_b, pose_b)
    ca, cb = segment_closest_points(sa, da, sb, db)
    diff = ca - cb
    center_dist = float(np.linalg.norm(diff))
    if center_dist < 1e-12:
        normal = np.array([0.0, 0.0, 1.0])
        degenerate = True
    else:
        normal = diff / center_dist
        degenerate = False
    d = center_dist - geom_a.radius - geom_b.radius
    return ContactInfo(
        distance=d,
        point_a=ca - geom_a.radius * normal,
        point_b=cb + geom_b.radius * normal,
        normal=normal,
        degenerate=degenerate,
    )


def pair_contact(model: RobotModel, fs: FrameSet, pair: tuple[str, str]) -> ContactInfo:
    ga, gb = model.geom(pair[0]), model.geom(pair[1])
    return closest_points(ga, fs.poses[ga.frame], gb, fs.poses[gb.frame])


def contact_jacobian(model: RobotModel, q, pair: tuple[str, str], info: ContactInfo) -> np.ndarray:
    """Row mapping qdot to the separation rate (positive = separating)."""
    q = model.check_config(q)
    fs = forward_kinematics(model, q)
    ga, gb = model.geom(pair[0]), model.geom(pair[1])
    Ja = point_linear_jacobian(model, q, ga.frame, info.point_a, fs)
    Jb = point_linear_jacobian(model, q, gb.frame, info.point_b, fs)
    return info.normal @ (Ja - Jb)


def active_constraints(
    model: RobotModel,
    q,
    dt: float,
    params: DamperParams,
    fs: FrameSet | None = None,
) -> list[tuple[tuple[str, str], float, np.ndarray, float]]:
    """Damper rows for every declared pair within detection range.

    Returns (pair, distance, row, bound) tuples such that row @ qdot <= bound
    enforces -n^T J qdot <= gain * (d - d_min) / dt + relaxation.
    """
    q = model.check_config(q)
    if fs is None:
        fs = forward_kinematics(model, q)
    out = []
    for pair in model.collision_pairs:
        info = pair_contact(model, fs, pair)
        if info.distance >= params.detection_range:
            continue
        row = -contact_jacobian(model, q, pair, info)
        bound = params.gain * (info.distance - params.d_min) / dt + params.relaxation
        out.append((pair, info.distance, row, bound))
    return out


def pair_distances(model: RobotModel, q, fs: FrameSet | None = None) -> dict[tuple[str, str], float]:
    """Current surface distance of every declared collision pair."""
    q = model.check_config(q)
    if fs is None:
        fs = forward_kinematics(model, q)
    return {pair: pair_contact(model, fs, pair).distance for pair in model.collision_pairs}
