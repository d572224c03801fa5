"""Hybrid execution state machine.

Keypose actions are absolute end-effector targets executed as interpolated
waypoint trajectories; dense actions are small per-tick deltas consumed
from 16-action chunks, re-queried after 8. Mode transitions happen only at
trajectory/chunk boundaries, and every episode starts in keypose mode.
"""

from __future__ import annotations

import json
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose, Rotation, Twist, interpolate_pose, pose_error, so3_exp
from .perception import KeyposeAction

MODE_KEYPOSE = "keypose"
MODE_DENSE = "dense"
MODE_TERMINATE = "terminate"
MODES = (MODE_KEYPOSE, MODE_DENSE, MODE_TERMINATE)

DENSE_HORIZON = 16  # actions predicted per dense query
DENSE_EXECUTE = 8  # actions executed before re-querying

MAX_DENSE_LINEAR = 0.1  # m, sanity clamp
MAX_DENSE_ANGULAR = 0.5  # rad

DEFAULT_MAX_LIN_STEP = 0.02  # m per 10 Hz tick
DEFAULT_MAX_ANG_STEP = 0.05  # rad per 10 Hz tick


class ExecutorError(RuntimeError):
    pass


def _clamped_twist(linear, angular) -> Twist:
    lin = np.asarray(linear, dtype=float)
    ang = np.asarray(angular, dtype=float)
    ln, an = np.linalg.norm(lin), np.linalg.norm(ang)
    if ln > MAX_DENSE_LINEAR:
        lin = lin * (MAX_DENSE_LINEAR / ln)
    if an > MAX_DENSE_ANGULAR:
        ang = ang * (MAX_DENSE_ANGULAR / an)
    return Twist(lin, ang)


@dataclass(frozen=True)
class DenseAction:
    """One relative end-effector step, clamped to the sanity bounds."""

    delta: Twist
    gripper: float
    next_mode: str

    def __post_init__(self):
        object.__setattr__(self, "delta", _clamped_twist(self.delta.linear, self.delta.angular))
        if self.next_mode not in MODES:
            raise ValueError(f"bad mode {self.next_mode!r}")


class PolicySource(ABC):
    """Provider of keypose and dense sub-policy outputs."""

    @abstractmethod
    def keypose_query(self, observation) -> KeyposeAction: ...

    @abstractmethod
    def dense_query(self, observation) -> list[DenseAction]: ...


@dataclass
class ExecutorState:
    mode: str = MODE_KEYPOSE  # episodes start in keypose mode
    ee_pose: Pose = field(default_factory=Pose)
    gripper: float = 0.0
    step_count: int = 0
    waypoints: list[Pose] = field(default_factory=list)
    pending_gripper: float | None = None
    pending_mode: str | None = None
    chunk: list[DenseAction] = field(default_factory=list)
    consumed: int = 0
    keypose_queries: int = 0
    dense_queries: int = 0


def plan_keypose_trajectory(
    current: Pose,
    target: Pose,
    max_lin_step: float = DEFAULT_MAX_LIN_STEP,
    max_ang_step: float = DEFAULT_MAX_ANG_STEP,
) -> list[Pose]:
    """Waypoints from current to target with bounded per-step motion.

    n = ceil(max(lin/max_lin, ang/max_ang)); the last waypoint is target
    exactly. Degenerate current == target gives [target].
    """
    if max_lin_step <= 0 or max_ang_step <= 0:
        raise ValueError("step limits must be positive")
    err = pose_error(current, target)
    lin_dist = float(np.linalg.norm(err.linear))
    ang_dist = float(np.linalg.norm(err.angular))
    n = int(np.ceil(max(lin_dist / max_lin_step, ang_dist / max_ang_step)))
    if n == 0:
        return [target]
    return [interpolate_pose(current, target, k / n) for k in range(1, n + 1)]


def apply_dense_delta(current: Pose, delta: Twist) -> Pose:
    """World-frame composition: translation adds, rotation pre-composes."""
    return Pose(
        current.translation + delta.linear,
        so3_exp(delta.angular) @ current.rotation,
    )


def step(state: ExecutorState, policy: PolicySource, observation) -> tuple[Pose, float, ExecutorState]:
    """Advance one control tick; emits the next end-effector target."""
    if state.mode == MODE_TERMINATE:
        raise ExecutorError("cannot step a terminated executor")

    if state.mode == MODE_KEYPOSE:
        if not state.waypoints:
            action = policy.keypose_query(observation)
            state.keypose_queries += 1
            state.waypoints = plan_keypose_trajectory(state.ee_pose, action.pose)
            state.pending_gripper = action.gripper
            state.pending_mode = action.next_mode
        target = state.waypoints.pop(0)
        if not state.waypoints:  # trajectory complete: gripper + mode apply now
            state.gripper = state.pending_gripper
            state.mode = state.pending_mode
            state.pending_gripper = state.pending_mode = None
    else:  # dense
        if not state.chunk or state.consumed >= DENSE_EXECUTE:
            chunk = policy.dense_query(observation)
            if len(chunk) != DENSE_HORIZON:
                raise ExecutorError(f"dense query must yield {DENSE_HORIZON} actions, got {len(chunk)}")
            state.chunk = list(chunk)
            state.consumed = 0
            state.dense_queries += 1
        action = state.chunk[state.consumed]
        state.consumed += 1
        target = apply_dense_delta(state.ee_pose, action.delta)
        state.gripper = action.gripper
        if state.consumed == DENSE_EXECUTE and action.next_mode != MODE_DENSE:
            state.mode = action.next_mode
            state.chunk = []
            state.consumed = 0

    state.ee_pose = target
    state.step_count += 1
    return target, state.gripper, state


class ScriptedPolicy(PolicySource):
    """Deterministic policy replaying an ordered JSON scenario script.

    Script entries: {"type": "keypose", "pose": {"pos", "quat"}, "gripper",
    "next_mode"} or {"type": "dense_chunk", "deltas": [[6 floats] x 16],
    "gripper", "next_mode"}.
    """

    def __init__(self, steps: list[dict]):
        self.steps = list(steps)
        self.cursor = 0

    @classmethod
    def from_file(cls, path) -> "ScriptedPolicy":
        with open(path) as f:
            doc = json.load(f)
        return cls(doc["steps"] if isinstance(doc, dict) else doc)

    def _next(self, expected: str) -> dict:
        if self.cursor >= len(self.steps):
            raise ExecutorError("scripted policy exhausted")
        entry = self.steps[self.cursor]
        if entry["type"] != expected:
            raise ExecutorError(f"script expected {entry['type']!r} query, executor asked for {expected!r}")
        self.cursor += 1
        return entry

    def keypose_query(self, observation) -> KeyposeAction:
        entry = self._next("keypose")
        pose = Pose.from_pos_quat(entry["pose"]["pos"], entry["pose"]["quat"])
        return KeyposeAction(pose, float(entry.get("gripper", 0.0)), entry["next_mode"])

    def dense_query(self, observation) -> list[DenseAction]:
        entry = self._next("dense_chunk")
        gripper = float(entry.get("gripper", 0.0))
        next_mode = entry["next_mode"]
        return [
            DenseAction(Twist(np.asarray(d[:3], dtype=float), np.asarray(d[3:6], dtype=float)), gripper, next_mode)
            for d in entry["deltas"]
        ]


class ReachPolicy(PolicySource):
    """Built-in policy: one keypose at the observed scenario target, then
    terminate. Used by the benchmark harness."""

    def __init__(self, gripper: float = 0.0):
        self.gripper = gripper

    def keypose_query(self, observation) -> KeyposeAction:
        target: Pose = observation["target"]
        return KeyposeAction(target, self.gripper, MODE_TERMINATE)

    def dense_query(self, observation) -> list[DenseAction]:
        raise ExecutorError("reach policy has no dense sub-policy")
