"""Command-line entry points.

Exit codes: 0 on success, 2 for invalid inputs or arguments, 3 for a run
that executed but failed (episode unsuccessful, controller nonconvergent,
replay deviation).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import executor as ex
from . import harness, qp, wbc
from .collision import active_constraints
from .geometry import Pose
from .model import ModelLoadError, forward_kinematics, load_model, load_reference_model

EXIT_BAD_INPUT = 2
EXIT_RUN_FAILED = 3


def _fail_input(msg: str):
    click.echo(f"error: {msg}", err=True)
    sys.exit(EXIT_BAD_INPUT)


def _load_scenario(path) -> harness.Scenario:
    try:
        return harness.Scenario.from_file(path)
    except (OSError, ValueError, KeyError) as e:
        _fail_input(f"bad scenario {path}: {e}")


def _load_policy(path) -> ex.PolicySource:
    if path is None:
        return ex.ReachPolicy()
    try:
        return ex.ScriptedPolicy.from_file(path)
    except (OSError, ValueError, KeyError) as e:
        _fail_input(f"bad policy {path}: {e}")


def _load_params(path) -> wbc.WbcParams:
    try:
        return wbc.load_params(path)
    except (OSError, ValueError, TypeError) as e:
        _fail_input(f"bad params: {e}")


@click.group()
def main():
    """Mobile-manipulation control stack: simulate, benchmark, replay, serve."""


@main.command("run-sim")
@click.option("--scenario", "scenario_path", required=True, type=click.Path(exists=True))
@click.option("--policy", "policy_path", type=click.Path(exists=True), help="Scripted policy JSON; defaults to the built-in reach policy.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--record", "record_path", type=click.Path(), help="Write the episode JSONL here (plus .annotations.json sidecar).")
@click.option("--params", "params_path", type=click.Path(exists=True), help="Controller params JSON.")
def run_sim(scenario_path, policy_path, seed, record_path, params_path):
    """Run one simulated episode and report success."""
    scenario = _load_scenario(scenario_path)
    policy = _load_policy(policy_path)
    params = _load_params(params_path)
    record, success = harness.run_episode(scenario, policy, params, seed=seed)
    if record_path:
        record.save(record_path)
        record.save_annotations(Path(record_path).with_suffix(".annotations.json"))
    click.echo(f"{'success' if success else 'failure'}: {record.header['reason']} ({len(record.ticks)} ticks)")
    if not success:
        sys.exit(EXIT_RUN_FAILED)


@main.command("benchmark")
@click.option("--scenario", "scenario_path", required=True, type=click.Path(exists=True))
@click.option("--trials", required=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path(), help="Summary JSON; a per-trial CSV is written next to it.")
@click.option("--params", "params_path", type=click.Path(exists=True))
def benchmark(scenario_path, trials, seed, out_path, params_path):
    """Run independent seeded trials and aggregate the success rate."""
    if trials < 1:
        _fail_input("--trials must be >= 1")
    scenario = _load_scenario(scenario_path)
    params = _load_params(params_path)
    csv_path = Path(out_path).with_suffix(".csv")
    summary = harness.benchmark(scenario, trials, seed=seed, params=params, out_json=out_path, out_csv=csv_path)
    click.echo(json.dumps(summary, indent=1))


@main.command("replay")
@click.option("--episode", "episode_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_path", type=click.Path(exists=True))
@click.option("--params", "params_path", type=click.Path(exists=True))
@click.option("--tolerance", default=1e-9, show_default=True, type=float, help="Max per-DoF deviation treated as a faithful replay.")
def replay(episode_path, model_path, params_path, tolerance):
    """Re-run a recorded episode through the controller and diff trajectories."""
    try:
        record = harness.EpisodeRecord.load(episode_path)
    except (OSError, harness.RecordError) as e:
        _fail_input(f"bad episode: {e}")
    try:
        model = load_model(model_path) if model_path else load_reference_model()
    except (OSError, ModelLoadError) as e:
        _fail_input(f"bad model: {e}")
    params = _load_params(params_path)
    report = harness.replay(record, model, params)
    for w in report.warnings:
        click.echo(f"warning: {w}", err=True)
    click.echo(f"ticks={len(report.per_tick)} max_deviation={report.max_deviation:.3e}")
    if report.max_deviation > tolerance:
        sys.exit(EXIT_RUN_FAILED)


@main.command("serve")
@click.option("--port", default=8733, show_default=True, type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--params", "params_path", type=click.Path(exists=True))
def serve(port, host, params_path):
    """Start the WebSocket teleoperation service."""
    import uvicorn

    from .service import create_app

    params = _load_params(params_path)
    uvicorn.run(create_app(params=params), host=host, port=port, log_level="warning")


def _parse_csv_floats(text: str, what: str) -> np.ndarray:
    try:
        return np.array([float(tok) for tok in text.split(",")], dtype=float)
    except ValueError:
        _fail_input(f"{what} must be comma-separated floats, got {text!r}")


@main.command("solve-ik")
@click.option("--model", "model_path", type=click.Path(exists=True), help="Robot model JSON; defaults to the bundled reference model.")
@click.option("--q", "q_csv", required=True, help="Start configuration, comma-separated.")
@click.option("--target", "target_csv", required=True, help="Target pose: px,py,pz,qw,qx,qy,qz.")
@click.option("--trace", is_flag=True, help="Print per-iteration errors.")
@click.option("--params", "params_path", type=click.Path(exists=True))
@click.option("--dump-qp", "dump_qp", type=click.Path(), help="Write the first assembled QP to this file (debug).")
@click.option("--dump-constraints", is_flag=True, help="Print active collision constraints at the start config (debug).")
def solve_ik(model_path, q_csv, target_csv, trace, params_path, dump_qp, dump_constraints):
    """One controller solve: start config + target pose -> joint command."""
    try:
        model = load_model(model_path) if model_path else load_reference_model()
    except (OSError, ModelLoadError) as e:
        _fail_input(f"bad model: {e}")
    q = _parse_csv_floats(q_csv, "--q")
    if q.shape != (model.dof,):
        _fail_input(f"--q must have {model.dof} values, got {q.size}")
    tv = _parse_csv_floats(target_csv, "--target")
    if tv.shape != (7,):
        _fail_input(f"--target must have 7 values (px,py,pz,qw,qx,qy,qz), got {tv.size}")
    try:
        target = Pose.from_pos_quat(tv[:3], tv[3:])
    except ValueError as e:
        _fail_input(f"bad target: {e}")
    params = _load_params(params_path)
    if dump_constraints:
        rows = active_constraints(model, q, params.dt, params.damper)
        for pair, d, row, bound in rows:
            click.echo(f"constraint {pair[0]}/{pair[1]}: d={d:.4f} bound={bound:.4f} row={np.array2string(row, precision=4)}", err=True)
    if dump_qp:
        qp.dump_problem(wbc.assemble_step(model, q, target, params), dump_qp)
    result = wbc.solve(model, q, target, params, keep_trace=trace)
    if trace and result.trace:
        for i, entry in enumerate(result.trace):
            click.echo(f"iter {i}: pos_error={entry['pos_error']:.3e} ori_error={entry['ori_error']:.3e}", err=True)
    ee = forward_kinematics(model, result.command).ee
    click.echo(
        json.dumps(
            {
                "command": result.command.tolist(),
                "converged": result.converged,
                "iterations": result.iterations,
                "pos_error": result.pos_error,
                "ori_error": result.ori_error,
                "ee_pose": harness.pose_to_json(ee),
                "failure": result.failure,
            },
            indent=1,
        )
    )
    if not result.converged:
        sys.exit(EXIT_RUN_FAILED)


if __name__ == "__main__":
    main()
