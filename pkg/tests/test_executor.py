import numpy as np
import pytest

from mobman.executor import (
    DENSE_EXECUTE,
    DENSE_HORIZON,
    MAX_DENSE_ANGULAR,
    MAX_DENSE_LINEAR,
    MODE_DENSE,
    MODE_KEYPOSE,
    MODE_TERMINATE,
    DenseAction,
    ExecutorError,
    ExecutorState,
    ReachPolicy,
    ScriptedPolicy,
    apply_dense_delta,
    plan_keypose_trajectory,
    step,
)
from mobman.geometry import Pose, Rotation, Twist, pose_error


def keypose_entry(pose: Pose, gripper=0.0, next_mode=MODE_TERMINATE):
    return {
        "type": "keypose",
        "pose": {"pos": pose.translation.tolist(), "quat": pose.rotation.wxyz.tolist()},
        "gripper": gripper,
        "next_mode": next_mode,
    }


def dense_entry(delta, gripper=0.0, next_mode=MODE_DENSE, n=DENSE_HORIZON):
    return {"type": "dense_chunk", "deltas": [list(delta)] * n, "gripper": gripper, "next_mode": next_mode}


class CountingPolicy(ReachPolicy):
    """Reach policy that also records what the executor asked for."""

    def __init__(self, target):
        super().__init__()
        self.target = target
        self.queries = []

    def keypose_query(self, observation):
        self.queries.append("keypose")
        return super().keypose_query({"target": self.target})


class TestPlanTrajectory:
    def test_step_count_from_ceiling_rule(self):
        a = Pose()
        b = Pose(np.array([0.05, 0.0, 0.0]))
        wps = plan_keypose_trajectory(a, b, max_lin_step=0.02, max_ang_step=0.05)
        assert len(wps) == 3  # ceil(0.05 / 0.02)
        assert wps[-1].approx_equal(b, tol=1e-15)

    def test_rotation_dominates(self):
        a = Pose()
        b = Pose(rotation=Rotation.about_z(0.275))
        wps = plan_keypose_trajectory(a, b, max_lin_step=0.02, max_ang_step=0.05)
        assert len(wps) == 6  # ceil(0.275 / 0.05) = ceil(5.5)

    def test_each_step_within_bounds(self):
        a = Pose(np.array([0.1, -0.2, 0.3]), Rotation.about_z(-0.4))
        b = Pose(np.array([0.0, 0.25, 0.1]), Rotation.about_z(0.5))
        wps = plan_keypose_trajectory(a, b)
        prev = a
        for w in wps:
            e = pose_error(prev, w)
            assert np.linalg.norm(e.linear) <= 0.02 + 1e-9
            assert np.linalg.norm(e.angular) <= 0.05 + 1e-9
            prev = w

    def test_degenerate_target_equals_current(self):
        a = Pose(np.array([1.0, 2.0, 3.0]))
        wps = plan_keypose_trajectory(a, a)
        assert len(wps) == 1 and wps[0].approx_equal(a)

    def test_bad_limits(self):
        with pytest.raises(ValueError):
            plan_keypose_trajectory(Pose(), Pose(), max_lin_step=0.0)


class TestDenseAction:
    def test_clamps_linear(self):
        a = DenseAction(Twist(np.array([1.0, 0.0, 0.0]), np.zeros(3)), 0.0, MODE_DENSE)
        assert np.isclose(np.linalg.norm(a.delta.linear), MAX_DENSE_LINEAR)

    def test_clamps_angular(self):
        a = DenseAction(Twist(np.zeros(3), np.array([0.0, 2.0, 0.0])), 0.0, MODE_DENSE)
        assert np.isclose(np.linalg.norm(a.delta.angular), MAX_DENSE_ANGULAR)

    def test_small_delta_unchanged(self):
        d = Twist(np.array([0.01, 0.0, 0.0]), np.array([0.0, 0.0, 0.02]))
        a = DenseAction(d, 0.0, MODE_DENSE)
        assert np.array_equal(a.delta.linear, d.linear)

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            DenseAction(Twist(), 0.0, "sideways")

    def test_world_frame_composition(self):
        pose = Pose(np.array([1.0, 0.0, 0.0]), Rotation.about_z(0.5))
        delta = Twist(np.array([0.0, 0.1, 0.0]), np.array([0.0, 0.0, 0.2]))
        out = apply_dense_delta(pose, delta)
        assert np.allclose(out.translation, [1.0, 0.1, 0.0])  # world translation adds
        assert out.rotation.approx_equal(Rotation.about_z(0.7))


class TestStateMachine:
    def test_starts_in_keypose_and_first_query_is_keypose(self):
        policy = CountingPolicy(Pose(np.array([0.05, 0.0, 0.0])))
        state = ExecutorState(ee_pose=Pose())
        assert state.mode == MODE_KEYPOSE
        step(state, policy, {})
        assert policy.queries[0] == "keypose"

    def test_keypose_trajectory_then_terminate(self):
        target = Pose(np.array([0.05, 0.0, 0.0]))
        policy = ScriptedPolicy([keypose_entry(target, gripper=1.0)])
        state = ExecutorState(ee_pose=Pose())
        emitted = []
        for _ in range(3):
            tgt, grip, state = step(state, policy, {})
            emitted.append((tgt, grip))
        # gripper applies only once the trajectory completes
        assert emitted[0][1] == 0.0 and emitted[1][1] == 0.0 and emitted[2][1] == 1.0
        assert emitted[-1][0].approx_equal(target)
        assert state.mode == MODE_TERMINATE
        with pytest.raises(ExecutorError):
            step(state, policy, {})

    def test_dense_requery_cadence_8_of_16(self):
        script = [
            keypose_entry(Pose(np.array([0.01, 0, 0])), next_mode=MODE_DENSE),
            dense_entry([0.001, 0, 0, 0, 0, 0]),
            dense_entry([0.001, 0, 0, 0, 0, 0]),
            dense_entry([0.001, 0, 0, 0, 0, 0], next_mode=MODE_TERMINATE),
        ]
        policy = ScriptedPolicy(script)
        state = ExecutorState(ee_pose=Pose())
        queries_at = []
        for tick in range(40):
            before = state.dense_queries
            _, _, state = step(state, policy, {})
            if state.dense_queries > before:
                queries_at.append(tick)
            if state.mode == MODE_TERMINATE:
                break
        # first dense query right after the 1-step keypose, then every 8 ticks
        assert queries_at == [1, 9, 17]
        assert state.mode == MODE_TERMINATE
        assert state.dense_queries == 3

    def test_mode_change_only_at_chunk_boundary(self):
        # terminate requested in the chunk, but only honored after 8 actions
        script = [
            keypose_entry(Pose(), next_mode=MODE_DENSE),
            dense_entry([0.001, 0, 0, 0, 0, 0], next_mode=MODE_TERMINATE),
        ]
        policy = ScriptedPolicy(script)
        state = ExecutorState(ee_pose=Pose())
        modes = []
        for _ in range(1 + DENSE_EXECUTE):
            _, _, state = step(state, policy, {})
            modes.append(state.mode)
        assert modes[:-1].count(MODE_TERMINATE) == 0
        assert modes[-1] == MODE_TERMINATE

    def test_dense_targets_accumulate_deltas(self):
        script = [
            keypose_entry(Pose(), next_mode=MODE_DENSE),
            dense_entry([0.002, 0, 0, 0, 0, 0], next_mode=MODE_TERMINATE),
        ]
        policy = ScriptedPolicy(script)
        state = ExecutorState(ee_pose=Pose())
        last = None
        for _ in range(1 + DENSE_EXECUTE):
            last, _, state = step(state, policy, {})
        assert np.allclose(last.translation, [0.002 * DENSE_EXECUTE, 0, 0], atol=1e-12)

    def test_wrong_chunk_length_rejected(self):
        script = [keypose_entry(Pose(), next_mode=MODE_DENSE), dense_entry([0, 0, 0, 0, 0, 0], n=5)]
        policy = ScriptedPolicy(script)
        state = ExecutorState(ee_pose=Pose())
        _, _, state = step(state, policy, {})
        with pytest.raises(ExecutorError, match="16"):
            step(state, policy, {})

    def test_scripted_policy_mismatch(self):
        policy = ScriptedPolicy([dense_entry([0, 0, 0, 0, 0, 0])])
        state = ExecutorState(ee_pose=Pose())
        with pytest.raises(ExecutorError, match="keypose"):
            step(state, policy, {})

    def test_scripted_policy_exhausted(self):
        policy = ScriptedPolicy([])
        with pytest.raises(ExecutorError, match="exhausted"):
            step(ExecutorState(ee_pose=Pose()), policy, {})

    def test_reach_policy_has_no_dense(self):
        with pytest.raises(ExecutorError):
            ReachPolicy().dense_query({})


class TestScriptedPolicyIO:
    def test_from_file(self, tmp_path):
        import json

        path = tmp_path / "script.json"
        path.write_text(json.dumps({"steps": [keypose_entry(Pose(np.array([0.1, 0, 0])))]}))
        policy = ScriptedPolicy.from_file(path)
        action = policy.keypose_query({})
        assert np.allclose(action.pose.translation, [0.1, 0, 0])
