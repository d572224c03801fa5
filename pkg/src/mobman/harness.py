"""Kinematic simulator, scenario runner, 10 Hz recorder/replayer, benchmark.

Commands take effect within one tick (no dynamics); episodes are fully
deterministic per seed, and every recording replays to zero deviation
under the same model and controller parameters.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import executor as ex
from . import wbc
from .geometry import Pose, pose_error
from .model import RobotModel, forward_kinematics, load_model, load_reference_model

TICK_DT = 0.1  # 10 Hz control/recording rate
SCHEMA_VERSION = 1


class SimError(ValueError):
    pass


class RecordError(ValueError):
    pass


@dataclass
class SimState:
    q: np.ndarray
    gripper: float = 0.0
    time: float = 0.0
    tick: int = 0


def sim_step(model: RobotModel, state: SimState, command) -> SimState:
    """Kinematic step: the command becomes the configuration within one tick."""
    command = model.check_config(command)
    lo, hi = model.pos_limits
    bad = np.flatnonzero((command < lo - 1e-9) | (command > hi + 1e-9))
    if bad.size:
        raise SimError(f"command violates position limits on DoF {bad[0]}")
    return SimState(command.copy(), state.gripper, state.time + TICK_DT, state.tick + 1)


def pose_to_json(p: Pose) -> dict:
    return {"pos": p.translation.tolist(), "quat": p.rotation.wxyz.tolist()}


def pose_from_json(d: dict) -> Pose:
    return Pose.from_pos_quat(d["pos"], d["quat"])


@dataclass(frozen=True)
class Scenario:
    model_path: str | None  # None = bundled reference model
    initial_q: np.ndarray | None
    initial_q_ranges: np.ndarray | None  # dof x 2, sampled per seed
    target_pose: Pose | None
    target_region: tuple[np.ndarray, np.ndarray] | None  # sampled reachable
    pos_tolerance: float = 0.005
    ori_tolerance: float = 0.05
    max_ticks: int = 300

    def __post_init__(self):
        if self.pos_tolerance <= 0 or self.ori_tolerance <= 0:
            raise ValueError("tolerances must be positive")
        if (self.initial_q is None) == (self.initial_q_ranges is None):
            raise ValueError("exactly one of initial_q / initial_q_ranges required")
        if (self.target_pose is None) == (self.target_region is None):
            raise ValueError("exactly one of target pose / region required")

    @classmethod
    def from_file(cls, path) -> "Scenario":
        with open(path) as f:
            doc = json.load(f)
        return cls.from_dict(doc)

    @classmethod
    def from_dict(cls, doc: dict) -> "Scenario":
        tgt = doc["target"]
        return cls(
            model_path=doc.get("model"),
            initial_q=np.asarray(doc["initial_q"], dtype=float) if "initial_q" in doc else None,
            initial_q_ranges=np.asarray(doc["initial_q_ranges"], dtype=float) if "initial_q_ranges" in doc else None,
            target_pose=pose_from_json(tgt["pose"]) if "pose" in tgt else None,
            target_region=(np.asarray(tgt["region"]["lo"], float), np.asarray(tgt["region"]["hi"], float))
            if "region" in tgt
            else None,
            pos_tolerance=float(doc.get("tolerance", {}).get("pos", 0.005)),
            ori_tolerance=float(doc.get("tolerance", {}).get("ori", 0.05)),
            max_ticks=int(doc.get("max_ticks", 300)),
        )

    def load_model(self) -> RobotModel:
        return load_model(self.model_path) if self.model_path else load_reference_model()


def _sample_initial_q(scenario: Scenario, model: RobotModel, rng) -> np.ndarray:
    if scenario.initial_q is not None:
        return scenario.initial_q.copy()
    r = scenario.initial_q_ranges
    if r.shape != (model.dof, 2):
        raise SimError("initial_q_ranges shape must be dof x 2")
    return rng.uniform(r[:, 0], r[:, 1])


def _sample_target(scenario: Scenario, model: RobotModel, rng) -> Pose:
    if scenario.target_pose is not None:
        return scenario.target_pose
    lo, hi = scenario.target_region
    plo, phi = model.pos_limits
    plo = np.maximum(plo, -np.pi)
    phi = np.minimum(phi, np.pi)
    # Reachable-by-construction: draw a random configuration, keep it when
    # its end-effector height falls in the region, then slide the planar
    # base so the end-effector lands exactly on a uniform point of the box.
    for _ in range(1000):
        q = rng.uniform(plo, phi)
        goal_xy = rng.uniform(lo[:2], hi[:2])
        ee = forward_kinematics(model, q).ee
        if not lo[2] <= ee.translation[2] <= hi[2]:
            continue
        q = q.copy()
        q[:2] += goal_xy - ee.translation[:2]
        blo, bhi = model.pos_limits
        if np.any(q[:2] < blo[:2]) or np.any(q[:2] > bhi[:2]):
            continue
        return forward_kinematics(model, q).ee
    raise SimError("could not sample a reachable target in the region")


@dataclass
class EpisodeRecord:
    header: dict
    ticks: list[dict] = field(default_factory=list)

    def save(self, path) -> None:
        with open(path, "w") as f:
            f.write(json.dumps(self.header) + "\n")
            for tick in self.ticks:
                f.write(json.dumps(tick) + "\n")

    @classmethod
    def load(cls, path) -> "EpisodeRecord":
        lines = Path(path).read_text().splitlines()
        if not lines:
            raise RecordError("empty episode file")
        try:
            header = json.loads(lines[0])
        except json.JSONDecodeError as e:
            raise RecordError(f"corrupt header: {e}") from e
        if not isinstance(header, dict):
            raise RecordError("header must be a JSON object")
        if header.get("schema_version") != SCHEMA_VERSION:
            raise RecordError(f"unsupported schema version {header.get('schema_version')}")
        ticks = []
        for i, line in enumerate(lines[1:]):
            try:
                tick = json.loads(line)
            except json.JSONDecodeError as e:
                raise RecordError(f"corrupt tick at index {i}: {e}") from e
            for key in ("t", "q", "gripper", "ee_pose", "target_ee_pose", "mode"):
                if key not in tick:
                    raise RecordError(f"tick {i} missing field {key!r}")
            ticks.append(tick)
        prev = -1
        for i, tick in enumerate(ticks):
            if tick["tick"] <= prev:
                raise RecordError(f"ticks not strictly increasing at index {i}")
            prev = tick["tick"]
        return cls(header, ticks)

    def mode_segments(self) -> list[dict]:
        segments = []
        for i, tick in enumerate(self.ticks):
            if segments and segments[-1]["mode"] == tick["mode"]:
                segments[-1]["end_tick"] = i + 1
            else:
                segments.append({"start_tick": i, "end_tick": i + 1, "mode": tick["mode"]})
        return segments

    def save_annotations(self, path, salient_points: list[dict] | None = None) -> None:
        doc = {
            "episode": self.header.get("episode_id", ""),
            "mode_segments": self.mode_segments(),
            "salient_points": salient_points if salient_points is not None else self.header.get("salient_points", []),
        }
        with open(path, "w") as f:
            json.dump(doc, f, indent=1)


class Recorder:
    """Accumulates 10 Hz ticks into an EpisodeRecord."""

    def __init__(self, model: RobotModel, params: wbc.WbcParams, seed=None, episode_id: str = ""):
        self.record = EpisodeRecord(
            {
                "schema_version": SCHEMA_VERSION,
                "model_name": model.name,
                "params_hash": params.hash(),
                "seed": seed,
                "dof": model.dof,
                "episode_id": episode_id,
                "initial_q": None,
                "salient_points": [],
            }
        )
        self.model = model

    def add(self, state: SimState, target: Pose, mode: str) -> None:
        fs = forward_kinematics(self.model, state.q)
        self.record.ticks.append(
            {
                "tick": state.tick,
                "t": state.time,
                "q": state.q.tolist(),
                "gripper": state.gripper,
                "ee_pose": pose_to_json(fs.ee),
                "target_ee_pose": pose_to_json(target),
                "mode": mode,
            }
        )


def run_episode(
    scenario: Scenario,
    policy: ex.PolicySource,
    params: wbc.WbcParams,
    seed: int = 0,
) -> tuple[EpisodeRecord, bool]:
    """Execute one 10 Hz episode: executor -> WBC -> kinematic sim."""
    model = scenario.load_model()
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    q0 = _sample_initial_q(scenario, model, rng)
    target = _sample_target(scenario, model, rng)

    recorder = Recorder(model, params, seed=seed)
    recorder.record.header["initial_q"] = q0.tolist()
    recorder.record.header["scenario_target"] = pose_to_json(target)

    sim = SimState(q0.copy())
    state = ex.ExecutorState(ee_pose=forward_kinematics(model, q0).ee)
    success = False
    reason = "timeout"
    queries_seen = 0
    salient = []
    while sim.tick < scenario.max_ticks:
        obs = {"q": sim.q.copy(), "ee_pose": state.ee_pose, "target": target, "tick": sim.tick}
        try:
            ee_target, gripper, state = ex.step(state, policy, obs)
        except ex.ExecutorError as e:
            reason = f"policy_error: {e}"
            break
        if state.keypose_queries > queries_seen:
            queries_seen = state.keypose_queries
            salient.append({"tick": sim.tick, "xyz": state.waypoints[-1].translation.tolist() if state.waypoints else ee_target.translation.tolist()})
        result = wbc.solve(model, sim.q, ee_target, params)
        if result.failure:
            reason = f"wbc_failure: {result.failure}"
            recorder.add(SimState(result.command, gripper, sim.time + TICK_DT, sim.tick + 1), ee_target, state.mode)
            break
        sim = sim_step(model, SimState(sim.q, gripper, sim.time, sim.tick), result.command)
        recorder.add(sim, ee_target, state.mode)
        if state.mode == ex.MODE_TERMINATE:
            err = pose_error(forward_kinematics(model, sim.q).ee, target)
            pos_err = float(np.linalg.norm(err.linear))
            ori_err = float(np.linalg.norm(err.angular))
            success = pos_err <= scenario.pos_tolerance and ori_err <= scenario.ori_tolerance
            reason = "done" if success else f"tolerance: pos={pos_err:.4f} ori={ori_err:.4f}"
            break
    recorder.record.header["success"] = success
    recorder.record.header["reason"] = reason
    recorder.record.header["salient_points"] = salient
    return recorder.record, success


@dataclass
class ReplayReport:
    max_deviation: float
    per_tick: list[float]
    hash_match: bool
    warnings: list[str] = field(default_factory=list)


def replay(record: EpisodeRecord, model: RobotModel, params: wbc.WbcParams) -> ReplayReport:
    """Re-feed the recorded target stream through the WBC and diff configs."""
    warnings = []
    hash_match = record.header.get("model_name") == model.name and record.header.get("params_hash") == params.hash()
    if not hash_match:
        warnings.append("model/params hash mismatch; deviations expected")
    q = np.asarray(record.header["initial_q"], dtype=float)
    per_tick = []
    for tick in record.ticks:
        target = pose_from_json(tick["target_ee_pose"])
        result = wbc.solve(model, q, target, params)
        q = result.command
        per_tick.append(float(np.max(np.abs(q - np.asarray(tick["q"])))))
    return ReplayReport(max(per_tick, default=0.0), per_tick, hash_match, warnings)


def trial_seed(seed: int, trial: int) -> int:
    """Per-trial seed from a splittable counter-based sequence."""
    return int(np.random.SeedSequence(entropy=seed, spawn_key=(trial,)).generate_state(1)[0])


def benchmark(
    scenario: Scenario,
    trials: int,
    seed: int = 0,
    params: wbc.WbcParams | None = None,
    policy_factory=None,
    out_json=None,
    out_csv=None,
) -> dict:
    """Aggregate success rate over independent per-seed trials."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    params = params or wbc.WbcParams()
    policy_factory = policy_factory or (lambda: ex.ReachPolicy())
    rows = []
    for trial in range(trials):
        record, success = run_episode(scenario, policy_factory(), params, seed=trial_seed(seed, trial))
        target = pose_from_json(record.header["scenario_target"])
        model = scenario.load_model()
        final_q = np.asarray(record.ticks[-1]["q"]) if record.ticks else np.asarray(record.header["initial_q"])
        err = pose_error(forward_kinematics(model, final_q).ee, target)
        rows.append(
            {
                "trial": trial,
                "seed": trial_seed(seed, trial),
                "success": success,
                "ticks": len(record.ticks),
                "final_pos_error": float(np.linalg.norm(err.linear)),
                "final_ori_error": float(np.linalg.norm(err.angular)),
                "reason": record.header["reason"],
            }
        )
    summary = {
        "trials": trials,
        "success_rate": sum(r["success"] for r in rows) / trials,
        "mean_ticks": float(np.mean([r["ticks"] for r in rows])),
        "mean_final_pos_error": float(np.mean([r["final_pos_error"] for r in rows])),
        "mean_final_ori_error": float(np.mean([r["final_ori_error"] for r in rows])),
    }
    if out_json:
        with open(out_json, "w") as f:
            json.dump(summary, f, indent=1)
    if out_csv:
        with open(out_csv, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
    return summary
