"""Whole-body differential-IK controller.

Each call assembles a small QP over joint velocities (end-effector
tracking, posture regularization toward the retract configuration, base
damping), subject to velocity limits, position limits folded into the
velocity box, and optional collision velocity-damper rows. Velocities are
Euler-integrated for up to 20 iterations until the pose error falls below
the convergence thresholds.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .collision import DamperParams, active_constraints
from .geometry import Pose, pose_error
from .model import EE_FRAME, RobotModel, forward_kinematics, geometric_jacobian
from .qp import QpProblem, QpSolution, solve_qp

PARAMS_ENV_VAR = "HOMER_WBC_PARAMS"


@dataclass(frozen=True)
class WbcParams:
    """Controller weights and tolerances; defaults are the paper-agnostic
    single parameter set used across every task, never retuned."""

    w_ee_pos: float = 1.0
    w_ee_ori: float = 1.0
    w_posture_arm: float = 2e-3
    w_posture_base: float = 0.0
    w_damping_base: float = 1.5
    lm_damping: float = 1.0
    dt: float = 0.02
    max_iters: int = 20
    pos_tol: float = 1e-4
    ori_tol: float = 1e-4
    collision_enabled: bool = True
    damper: DamperParams = field(default_factory=DamperParams)

    def __post_init__(self):
        if self.dt <= 0 or self.pos_tol <= 0 or self.ori_tol <= 0:
            raise ValueError("dt and tolerances must be positive")
        if min(self.w_ee_pos, self.w_ee_ori, self.w_posture_arm, self.w_posture_base, self.w_damping_base) < 0:
            raise ValueError("weights must be nonnegative")

    def w_ee(self) -> np.ndarray:
        return np.concatenate([np.full(3, self.w_ee_pos), np.full(3, self.w_ee_ori)])

    def w_posture(self, dof: int) -> np.ndarray:
        w = np.full(dof, self.w_posture_arm)
        w[:3] = self.w_posture_base
        return w

    def w_damping(self, dof: int) -> np.ndarray:
        w = np.zeros(dof)
        w[:3] = self.w_damping_base
        return w

    def hash(self) -> str:
        import hashlib

        payload = json.dumps(params_to_dict(self), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


def params_to_dict(p: WbcParams) -> dict:
    return {
        "w_ee_pos": p.w_ee_pos,
        "w_ee_ori": p.w_ee_ori,
        "w_posture_arm": p.w_posture_arm,
        "w_posture_base": p.w_posture_base,
        "w_damping_base": p.w_damping_base,
        "lm_damping": p.lm_damping,
        "dt": p.dt,
        "max_iters": p.max_iters,
        "pos_tol": p.pos_tol,
        "ori_tol": p.ori_tol,
        "collision_enabled": p.collision_enabled,
        "damper": {
            "d_min": p.damper.d_min,
            "detection_range": p.damper.detection_range,
            "gain": p.damper.gain,
            "relaxation": p.damper.relaxation,
        },
    }


def params_from_dict(doc: dict) -> WbcParams:
    damper = DamperParams(**doc.pop("damper")) if "damper" in doc else DamperParams()
    return WbcParams(damper=damper, **doc)


def load_params(path: str | None = None) -> WbcParams:
    """Defaults, optionally overridden by a params JSON file or the
    HOMER_WBC_PARAMS environment variable."""
    path = path or os.environ.get(PARAMS_ENV_VAR)
    if not path:
        return WbcParams()
    with open(path) as f:
        return params_from_dict(json.load(f))


@dataclass
class WbcResult:
    command: np.ndarray
    iterations: int
    pos_error: float
    ori_error: float
    converged: bool
    limits_clamped: bool = False
    failure: str | None = None
    trace: list[dict] | None = None


def _clamp_to_limits(model: RobotModel, q: np.ndarray) -> tuple[np.ndarray, bool]:
    lo, hi = model.pos_limits
    clipped = np.clip(q, lo, hi)
    return clipped, bool(np.max(np.abs(clipped - q), initial=0.0) > 1e-6)


def assemble_step(
    model: RobotModel,
    q,
    target: Pose,
    params: WbcParams,
    fs=None,
) -> QpProblem:
    """Build the joint-velocity QP for one iteration at configuration q."""
    q = model.check_config(q)
    if fs is None:
        fs = forward_kinematics(model, q)
    J = geometric_jacobian(model, q, EE_FRAME)
    e = pose_error(fs.ee, target).as_vector()
    dof = model.dof
    w_ee = params.w_ee()
    wp = params.w_posture(dof)
    dt = params.dt
    # Levenberg-Marquardt: damping scales with the squared weighted error so
    # steps stay conservative far from the target and turn Newton-like near
    # it; a small floor keeps H strictly positive definite at singularities.
    mu = params.lm_damping * float(np.sum(w_ee * e * e)) + 1e-8
    H = (J.T * w_ee) @ J + np.diag(dt * dt * wp + params.w_damping(dof)) + mu * np.eye(dof)
    # tracking target is the velocity e/dt that closes the pose error in one
    # Euler step; without the 1/dt the iteration contracts by only ~dt per
    # step and never meets the convergence budget
    g = -(J.T * w_ee) @ (e / dt) + dt * wp * (q - model.retract_posture)
    lo, hi = model.pos_limits
    vel = model.vel_limits
    lb = np.maximum(-vel, (lo - q) / dt)
    ub = np.minimum(vel, (hi - q) / dt)
    # A clamped start can invert a bound pair by a rounding hair; keep box sane
    upper_floor = np.maximum(ub, lb)
    A = b = None
    if params.collision_enabled and model.collision_pairs:
        rows = active_constraints(model, q, dt, params.damper, fs)
        if rows:
            A = np.array([r[2] for r in rows])
            b = np.array([r[3] for r in rows])
    return QpProblem(H, g, A=A, b=b, lb=lb, ub=upper_floor)


def step_once(
    model: RobotModel,
    q,
    target: Pose,
    params: WbcParams,
) -> tuple[np.ndarray, np.ndarray, QpSolution]:
    """Single assemble/solve/integrate step; returns (q_next, qdot, solution).

    On infeasibility the damper relaxation is widened once; if the QP is
    still infeasible the robot holds (qdot = 0).
    """
    q = model.check_config(q)
    problem = assemble_step(model, q, target, params)
    sol = solve_qp(problem)
    if sol.status == "infeasible":
        relaxed = replace(params, damper=replace(params.damper, relaxation=params.damper.relaxation + 0.01))
        sol = solve_qp(assemble_step(model, q, target, relaxed))
        if sol.status == "infeasible":
            return q.copy(), np.zeros(model.dof), sol
    qdot = sol.x
    q_next = q + qdot * params.dt
    lo, hi = model.pos_limits
    q_next = np.clip(q_next, lo, hi)  # remove sub-tolerance numerical spill
    return q_next, qdot, sol


def solve(
    model: RobotModel,
    q,
    target: Pose,
    params: WbcParams | None = None,
    keep_trace: bool = False,
) -> WbcResult:
    """Map a desired end-effector pose to a joint position command."""
    params = params or WbcParams()
    q, clamped = _clamp_to_limits(model, model.check_config(q))
    trace: list[dict] | None = [] if keep_trace else None
    iterations = 0
    pos_err = ori_err = np.inf
    failure = None
    for iterations in range(1, params.max_iters + 1):
        fs = forward_kinematics(model, q)
        err = pose_error(fs.ee, target)
        pos_err = float(np.linalg.norm(err.linear))
        ori_err = float(np.linalg.norm(err.angular))
        if trace is not None:
            trace.append({"q": q.tolist(), "pos_error": pos_err, "ori_error": ori_err})
        if pos_err < params.pos_tol and ori_err < params.ori_tol:
            return WbcResult(q, iterations, pos_err, ori_err, True, clamped, trace=trace)
        q_next, qdot, sol = step_once(model, q, target, params)
        if sol.status == "infeasible":
            failure = "qp_infeasible"
            break
        q = q_next
    fs = forward_kinematics(model, q)
    err = pose_error(fs.ee, target)
    pos_err = float(np.linalg.norm(err.linear))
    ori_err = float(np.linalg.norm(err.angular))
    converged = pos_err < params.pos_tol and ori_err < params.ori_tol
    return WbcResult(q, iterations, pos_err, ori_err, converged, clamped, failure=failure, trace=trace)
