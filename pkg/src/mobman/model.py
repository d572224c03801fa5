"""Kinematic model: planar base + N revolute arm joints, FK, Jacobian.

The base contributes three stacked DoFs (prismatic world-x, prismatic
world-y, revolute world-z yaw); arm joint i rotates about a fixed axis in
its parent-fixed frame. Configurations are plain float arrays ordered
[x, y, theta, arm_1 .. arm_N].
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import Pose, Rotation

EE_FRAME = "ee"
BASE_FRAME = "base"


class ModelLoadError(ValueError):
    """Model document violates the schema or an internal invariant."""


@dataclass(frozen=True)
class ArmJoint:
    name: str
    parent_transform: Pose
    axis: np.ndarray
    pos_limits: tuple[float, float]
    vel_limit: float


@dataclass(frozen=True)
class FixedFrame:
    name: str
    parent: str
    transform: Pose


@dataclass(frozen=True)
class Geom:
    """Collision primitive attached to a named frame.

    Capsule axis is the local z of the offset pose; spheres have
    half_length 0. Cylinders are mapped to capsules at load time.
    """

    name: str
    kind: str  # "sphere" | "capsule"
    radius: float
    half_length: float
    frame: str
    offset: Pose


@dataclass(frozen=True)
class RobotModel:
    name: str
    arm_joints: tuple[ArmJoint, ...]
    base_pos_limits: np.ndarray  # 3x2, +-inf where unbounded
    base_vel_limits: np.ndarray  # 3
    ee_transform: Pose
    retract_posture: np.ndarray
    fixed_frames: tuple[FixedFrame, ...] = ()
    geoms: tuple[Geom, ...] = ()
    collision_pairs: tuple[tuple[str, str], ...] = ()

    @property
    def n_arm(self) -> int:
        return len(self.arm_joints)

    @property
    def dof(self) -> int:
        return 3 + self.n_arm

    @property
    def pos_limits(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.concatenate([self.base_pos_limits[:, 0], [j.pos_limits[0] for j in self.arm_joints]])
        hi = np.concatenate([self.base_pos_limits[:, 1], [j.pos_limits[1] for j in self.arm_joints]])
        return lo, hi

    @property
    def vel_limits(self) -> np.ndarray:
        return np.concatenate([self.base_vel_limits, [j.vel_limit for j in self.arm_joints]])

    @property
    def frame_names(self) -> list[str]:
        return [BASE_FRAME] + [j.name for j in self.arm_joints] + [f.name for f in self.fixed_frames] + [EE_FRAME]

    def geom(self, name: str) -> Geom:
        for g in self.geoms:
            if g.name == name:
                return g
        raise KeyError(f"unknown geom {name!r}")

    def check_config(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if q.shape != (self.dof,):
            raise ValueError(f"config length {q.shape} does not match {self.dof} DoF")
        return q


@dataclass
class FrameSet:
    """World pose of every named frame at one configuration."""

    poses: dict[str, Pose] = field(default_factory=dict)
    # index of the last arm joint (0-based) affecting each frame; -1 = base only
    depth: dict[str, int] = field(default_factory=dict)

    @property
    def ee(self) -> Pose:
        return self.poses[EE_FRAME]

    def __getitem__(self, name: str) -> Pose:
        return self.poses[name]


def _parse_pose(doc, where: str) -> Pose:
    try:
        return Pose.from_pos_quat(doc["pos"], doc["quat"])
    except (KeyError, TypeError, ValueError) as e:
        raise ModelLoadError(f"bad transform at {where}: {e}") from e


def _limit(v, sign: float = -1.0) -> float:
    return sign * float("inf") if v is None else float(v)


def load_model(source) -> RobotModel:
    """Load and validate a model document (dict, JSON string, or path)."""
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        doc = json.loads(Path(source).read_text())
    elif isinstance(source, str):
        doc = json.loads(source)
    else:
        doc = source
    try:
        name = doc["name"]
        base = doc["base"]
        joints_doc = doc["arm_joints"]
    except (KeyError, TypeError) as e:
        raise ModelLoadError(f"missing required field: {e}") from e
    if not joints_doc:
        raise ModelLoadError("model needs at least one arm joint")

    joints = []
    for i, jd in enumerate(joints_doc):
        axis = np.asarray(jd["axis"], dtype=float)
        if abs(np.linalg.norm(axis) - 1.0) > 1e-9:
            raise ModelLoadError(f"non-unit axis on joint {jd.get('name', i)!r}: {axis.tolist()}")
        lo, hi = _limit(jd["pos_limits"][0]), _limit(jd["pos_limits"][1], 1.0)
        if lo > hi:
            raise ModelLoadError(f"pos_limits min > max on DoF {3 + i} (joint {jd.get('name', i)!r})")
        vel = float(jd["vel_limit"])
        if vel <= 0:
            raise ModelLoadError(f"vel_limit must be positive on joint {jd.get('name', i)!r}")
        joints.append(
            ArmJoint(
                name=jd["name"],
                parent_transform=_parse_pose(jd["parent_transform"], f"joint {jd['name']}"),
                axis=axis,
                pos_limits=(lo, hi),
                vel_limit=vel,
            )
        )

    base_pos = np.array([[_limit(lo), _limit(hi, 1.0)] for lo, hi in base["pos_limits"]])
    for i in range(3):
        if base_pos[i, 0] > base_pos[i, 1]:
            raise ModelLoadError(f"pos_limits min > max on DoF {i} (base)")
    base_vel = np.asarray(base["vel_limits"], dtype=float)
    if base_vel.shape != (3,) or np.any(base_vel <= 0):
        raise ModelLoadError("base vel_limits must be three positive values")

    retract = np.asarray(doc["retract_posture"], dtype=float)
    if retract.shape != (3 + len(joints),):
        raise ModelLoadError(f"retract_posture length {retract.size} != {3 + len(joints)}")

    fixed = tuple(
        FixedFrame(fd["name"], fd["parent"], _parse_pose(fd["transform"], f"frame {fd['name']}"))
        for fd in doc.get("fixed_frames", [])
    )
    frame_names = {BASE_FRAME, EE_FRAME} | {j.name for j in joints}
    for f in fixed:
        if f.parent not in frame_names:
            raise ModelLoadError(f"fixed frame {f.name!r} has unknown parent {f.parent!r}")
        frame_names.add(f.name)

    geoms = []
    for gd in doc.get("geoms", []):
        kind = gd["kind"]
        if kind == "cylinder":  # slender mounts: capsule of equal radius/half-length
            kind = "capsule"
        if kind not in ("sphere", "capsule"):
            raise ModelLoadError(f"unsupported geom kind {gd['kind']!r}")
        radius = float(gd["radius"])
        half_length = float(gd.get("half_length", 0.0)) if kind == "capsule" else 0.0
        if radius <= 0 or half_length < 0:
            raise ModelLoadError(f"bad dimensions on geom {gd['name']!r}")
        if gd["frame"] not in frame_names:
            raise ModelLoadError(f"geom {gd['name']!r} attached to unknown frame {gd['frame']!r}")
        offset = _parse_pose(gd["offset"], f"geom {gd['name']}") if "offset" in gd else Pose.identity()
        geoms.append(Geom(gd["name"], kind, radius, half_length, gd["frame"], offset))
    geom_names = {g.name for g in geoms}
    if len(geom_names) != len(geoms):
        raise ModelLoadError("duplicate geom names")

    pairs = []
    for pa, pb in doc.get("collision_pairs", []):
        if pa == pb:
            raise ModelLoadError(f"collision pair ({pa!r}, {pb!r}) references the same geom")
        if pa not in geom_names or pb not in geom_names:
            raise ModelLoadError(f"collision pair ({pa!r}, {pb!r}) references unknown geom")
        pairs.append((pa, pb))

    model = RobotModel(
        name=name,
        arm_joints=tuple(joints),
        base_pos_limits=base_pos,
        base_vel_limits=base_vel,
        ee_transform=_parse_pose(doc["ee_transform"], "ee_transform"),
        retract_posture=retract,
        fixed_frames=fixed,
        geoms=tuple(geoms),
        collision_pairs=tuple(pairs),
    )
    lo, hi = model.pos_limits
    if np.any(retract < lo) or np.any(retract > hi):
        raise ModelLoadError("retract_posture outside position limits")
    return model


def reference_model_path() -> Path:
    return Path(__file__).parent / "data" / "reference_model.json"


def load_reference_model() -> RobotModel:
    return load_model(reference_model_path())


def forward_kinematics(model: RobotModel, q) -> FrameSet:
    """World pose of every frame; deterministic pure function of (model, q)."""
    q = model.check_config(q)
    fs = FrameSet()
    base = Pose(np.array([q[0], q[1], 0.0]), Rotation.about_z(q[2]))
    fs.poses[BASE_FRAME] = base
    fs.depth[BASE_FRAME] = -1
    parent = base
    for i, joint in enumerate(model.arm_joints):
        joint_pose = parent @ joint.parent_transform @ Pose(rotation=Rotation.from_rotvec(joint.axis * q[3 + i]))
        fs.poses[joint.name] = joint_pose
        fs.depth[joint.name] = i
        parent = joint_pose
    fs.poses[EE_FRAME] = parent @ model.ee_transform
    fs.depth[EE_FRAME] = model.n_arm - 1
    for f in model.fixed_frames:
        fs.poses[f.name] = fs.poses[f.parent] @ f.transform
        fs.depth[f.name] = fs.depth[f.parent]
    return fs


def _joint_origins_axes(model: RobotModel, fs: FrameSet) -> tuple[np.ndarray, np.ndarray]:
    origins = np.array([fs.poses[j.name].translation for j in model.arm_joints])
    axes = np.array([fs.poses[j.name].rotation.apply(j.axis) for j in model.arm_joints])
    return origins, axes


def point_linear_jacobian(model: RobotModel, q, frame: str, world_point, fs: FrameSet | None = None) -> np.ndarray:
    """World-frame linear-velocity Jacobian (3 x dof) of a world point
    rigidly attached to the link carrying ``frame``."""
    q = model.check_config(q)
    if fs is None:
        fs = forward_kinematics(model, q)
    if frame not in fs.poses:
        raise ValueError(f"unknown frame {frame!r}")
    p = np.asarray(world_point, dtype=float)
    J = np.zeros((3, model.dof))
    J[0, 0] = 1.0
    J[1, 1] = 1.0
    base_origin = np.array([q[0], q[1], 0.0])
    J[:, 2] = np.cross([0.0, 0.0, 1.0], p - base_origin)
    origins, axes = _joint_origins_axes(model, fs)
    for j in range(fs.depth[frame] + 1):
        J[:, 3 + j] = np.cross(axes[j], p - origins[j])
    return J


def geometric_jacobian(model: RobotModel, q, frame: str = EE_FRAME, point_offset=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Body-frame geometric Jacobian (6 x dof): rows 1-3 linear, 4-6 angular,
    expressed in the target frame, consistent with pose_error."""
    q = model.check_config(q)
    fs = forward_kinematics(model, q)
    if frame not in fs.poses:
        raise ValueError(f"unknown frame {frame!r}")
    pose = fs.poses[frame]
    p = pose.translation + pose.rotation.apply(np.asarray(point_offset, dtype=float))
    Jlin = point_linear_jacobian(model, q, frame, p, fs)
    Jang = np.zeros((3, model.dof))
    Jang[:, 2] = [0.0, 0.0, 1.0]
    origins, axes = _joint_origins_axes(model, fs)
    for j in range(fs.depth[frame] + 1):
        Jang[:, 3 + j] = axes[j]
    Rinv = pose.rotation.as_matrix().T
    return np.vstack([Rinv @ Jlin, Rinv @ Jang])
