"""Deterministic geometry around the keypose policy: deprojection,
salient-point decoding, conditioned saliency maps, distractor augmentation,
and the binary point-cloud format. No neural inference lives here."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose, Rotation

CLOUD_MAGIC = b"MMPC"
SALIENCY_EPS = 1e-6  # inverse-distance regularizer, meters


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray  # M x 3, world frame, meters
    colors: np.ndarray | None = None  # M x 3 in [0, 1]

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if pts.shape[0] < 1 or not np.all(np.isfinite(pts)):
            raise ValueError("point cloud needs >= 1 finite point")
        object.__setattr__(self, "points", pts)
        if self.colors is not None:
            col = np.asarray(self.colors, dtype=np.float64).reshape(-1, 3)
            if col.shape != pts.shape:
                raise ValueError("colors must match points")
            object.__setattr__(self, "colors", col)

    @property
    def size(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class CameraModel:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    extrinsics: Pose = field(default_factory=Pose)  # camera-to-world

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point outside image")


@dataclass(frozen=True)
class KeyposeAction:
    pose: Pose
    gripper: float
    next_mode: str  # "keypose" | "dense" | "terminate"

    def __post_init__(self):
        if not 0.0 <= self.gripper <= 1.0:
            raise ValueError("gripper must be in [0, 1]")


def deproject(cam: CameraModel, pixel: tuple[float, float], depth: float) -> np.ndarray:
    """Pixel + depth to a world point through the camera extrinsics."""
    u, v = pixel
    if not (0 <= u < cam.width and 0 <= v < cam.height):
        raise ValueError(f"pixel ({u}, {v}) outside image")
    if depth <= 0:
        raise ValueError("depth must be positive")
    p_cam = np.array([(u - cam.cx) * depth / cam.fx, (v - cam.cy) * depth / cam.fy, depth])
    return cam.extrinsics.translation + cam.extrinsics.rotation.apply(p_cam)


def project(cam: CameraModel, world_point) -> tuple[float, float, float]:
    """Inverse of deproject: world point to (u, v, depth)."""
    p_cam = cam.extrinsics.inverse().rotation.apply(world_point) + cam.extrinsics.inverse().translation
    z = p_cam[2]
    if z <= 0:
        raise ValueError("point behind camera")
    return (cam.cx + cam.fx * p_cam[0] / z, cam.cy + cam.fy * p_cam[1] / z, z)


def decode_keypose(
    cloud: PointCloud,
    saliency,
    offsets,
    rotation: Rotation,
    gripper: float,
    next_mode: str,
) -> KeyposeAction:
    """Apply the per-point offset at the highest-saliency point.

    Ties in the argmax resolve to the lowest index, for replay determinism.
    """
    saliency = np.asarray(saliency, dtype=float)
    offsets = np.asarray(offsets, dtype=float).reshape(-1, 3)
    if saliency.shape != (cloud.size,) or offsets.shape != (cloud.size, 3):
        raise ValueError("saliency/offsets must match cloud size")
    if abs(float(saliency.sum()) - 1.0) > 1e-6:
        raise ValueError("saliency must sum to 1")
    i_star = int(np.argmax(saliency))  # np.argmax returns the first maximum
    position = cloud.points[i_star] + offsets[i_star]
    return KeyposeAction(Pose(position, rotation), gripper, next_mode)


def conditioned_saliency(cloud: PointCloud, keypoint) -> np.ndarray:
    """Per-point probabilities inversely proportional to keypoint distance."""
    keypoint = np.asarray(keypoint, dtype=float)
    w = 1.0 / (np.linalg.norm(cloud.points - keypoint, axis=1) + SALIENCY_EPS)
    return w / w.sum()


def add_distractors(
    cloud: PointCloud,
    n_clusters: int,
    points_per_cluster: int,
    bounds,
    seed: int,
    sigma: float = 0.02,
) -> PointCloud:
    """Append Gaussian clusters centered uniformly inside bounds.

    Original points stay unchanged and first; deterministic per seed.
    """
    lo = np.asarray(bounds[0], dtype=float)
    hi = np.asarray(bounds[1], dtype=float)
    if lo.shape != (3,) or hi.shape != (3,) or np.any(lo > hi):
        raise ValueError("bounds must be a valid axis-aligned box")
    if n_clusters == 0:
        return cloud
    rng = np.random.default_rng(seed)
    added = []
    for _ in range(n_clusters):
        center = rng.uniform(lo, hi)
        # tails clipped at 4 sigma so clusters stay near their center
        noise = np.clip(sigma * rng.standard_normal((points_per_cluster, 3)), -4 * sigma, 4 * sigma)
        added.append(center + noise)
    new_pts = np.vstack([cloud.points] + added)
    colors = None
    if cloud.colors is not None:
        colors = np.vstack([cloud.colors, 0.5 * np.ones((n_clusters * points_per_cluster, 3))])
    return PointCloud(new_pts, colors)


def save_cloud(cloud: PointCloud, path, include_color: bool = True) -> None:
    """Binary little-endian: magic, uint32 M, uint8 has_color, float32 data.

    include_color=False drops the RGB channel (appearance-dropout option).
    """
    has_color = cloud.colors is not None and include_color
    with open(path, "wb") as f:
        f.write(CLOUD_MAGIC)
        f.write(struct.pack("<IB", cloud.size, 1 if has_color else 0))
        f.write(cloud.points.astype("<f4").tobytes())
        if has_color:
            f.write(cloud.colors.astype("<f4").tobytes())


def load_cloud(path) -> PointCloud:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != CLOUD_MAGIC:
            raise ValueError(f"bad magic {magic!r}")
        m, has_color = struct.unpack("<IB", f.read(5))
        pts = np.frombuffer(f.read(12 * m), dtype="<f4").reshape(m, 3).astype(np.float64)
        colors = None
        if has_color:
            colors = np.frombuffer(f.read(12 * m), dtype="<f4").reshape(m, 3).astype(np.float64)
    return PointCloud(pts, colors)
