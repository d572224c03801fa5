"""WebSocket teleoperation service.

A 10 Hz control loop holds the last commanded end-effector target, solves
the whole-body controller each tick, and broadcasts one state message per
tick to every connected client. At most one client may hold the controller
role; everyone else observes. Commands arriving faster than the tick rate
follow latest-wins; slow observers get drop-oldest queues, never backpressure.
"""

from __future__ import annotations

import asyncio
import contextlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import executor as ex
from . import harness, wbc
from .collision import pair_distances
from .geometry import Pose
from .model import RobotModel, forward_kinematics, load_reference_model, reference_model_path

OBSERVER_QUEUE_SIZE = 16  # per-client buffered state messages before dropping oldest
COMMAND_TYPES = ("target_pose", "gripper", "mode", "record", "reset")


@dataclass
class _Client:
    socket: WebSocket
    queue: asyncio.Queue = field(default_factory=lambda: asyncio.Queue(maxsize=OBSERVER_QUEUE_SIZE))
    is_controller: bool = False


class TeleopServer:
    """Shared state behind the app: sim loop, clients, recording."""

    def __init__(self, model: RobotModel, params: wbc.WbcParams, tick_period: float = 0.1):
        self.model = model
        self.params = params
        self.tick_period = tick_period
        self.q = model.retract_posture.copy()
        self.gripper = 0.0
        self.mode = ex.MODE_KEYPOSE
        self.tick = 0
        self.target: Pose | None = None  # hold-last-target; None = hold position
        self.clients: list[_Client] = []
        self.controller: _Client | None = None
        self.recorder: harness.Recorder | None = None
        self.record_path: str | None = None
        self.last_record: harness.EpisodeRecord | None = None
        self._loop_task: asyncio.Task | None = None

    # -- control loop ------------------------------------------------------

    async def run_loop(self) -> None:
        while True:
            started = asyncio.get_event_loop().time()
            self.step()
            self.broadcast(self.state_message())
            elapsed = asyncio.get_event_loop().time() - started
            await asyncio.sleep(max(0.0, self.tick_period - elapsed))

    def step(self) -> None:
        self.tick += 1
        if self.target is not None and self.mode != ex.MODE_TERMINATE:
            result = wbc.solve(self.model, self.q, self.target, self.params)
            self.q = result.command
        if self.recorder is not None:
            target = self.target if self.target is not None else forward_kinematics(self.model, self.q).ee
            state = harness.SimState(self.q, self.gripper, self.tick * self.tick_period, self.tick)
            self.recorder.add(state, target, self.mode)

    def state_message(self) -> dict:
        fs = forward_kinematics(self.model, self.q)
        collisions = [
            {"pair": list(pair), "d": d}
            for pair, d in pair_distances(self.model, self.q, fs).items()
            if d < self.params.damper.detection_range
        ]
        return {
            "type": "state",
            "tick": self.tick,
            "q": self.q.tolist(),
            "ee_pose": harness.pose_to_json(fs.ee),
            "gripper": self.gripper,
            "mode": self.mode,
            "collision": collisions,
        }

    def broadcast(self, message: dict) -> None:
        text = json.dumps(message)
        for client in self.clients:
            if client.queue.full():  # drop-oldest, never block the loop
                with contextlib.suppress(asyncio.QueueEmpty):
                    client.queue.get_nowait()
            client.queue.put_nowait(text)

    # -- commands ----------------------------------------------------------

    def handle_command(self, message: dict) -> dict | None:
        """Apply one controller command; returns an optional direct reply.

        Unknown fields are ignored; unknown or malformed types raise ValueError.
        """
        mtype = message.get("type")
        if mtype == "target_pose":
            self.target = Pose.from_pos_quat(message["pos"], message["quat"])
            return None
        if mtype == "gripper":
            value = float(message["value"])
            if not 0.0 <= value <= 1.0:
                raise ValueError("gripper must be in [0, 1]")
            self.gripper = value
            return None
        if mtype == "mode":
            mode = message["mode"]
            if mode not in ex.MODES:
                raise ValueError(f"unknown mode {mode!r}")
            self.mode = mode
            if mode == ex.MODE_TERMINATE:
                self.target = None
            return None
        if mtype == "record":
            return self._handle_record(message)
        if mtype == "reset":
            self.q = self.model.retract_posture.copy()
            self.target = None
            self.gripper = 0.0
            self.mode = ex.MODE_KEYPOSE
            return None
        raise ValueError(f"unknown command type {mtype!r}")

    def _handle_record(self, message: dict) -> dict:
        action = message.get("action")
        if action == "start":
            if self.recorder is not None:
                raise ValueError("already recording")
            self.recorder = harness.Recorder(self.model, self.params, episode_id=f"teleop-{self.tick}")
            self.recorder.record.header["initial_q"] = self.q.tolist()
            self.record_path = message.get("path")
            return {"type": "record", "status": "started"}
        if action == "stop":
            if self.recorder is None:
                raise ValueError("not recording")
            record = self.recorder.record
            record.header["success"] = True
            record.header["reason"] = "teleop"
            self.recorder = None
            self.last_record = record
            if self.record_path:
                record.save(self.record_path)
                record.save_annotations(Path(self.record_path).with_suffix(".annotations.json"))
            return {"type": "record", "status": "stopped", "ticks": len(record.ticks)}
        raise ValueError(f"unknown record action {action!r}")

    # -- connection lifecycle ----------------------------------------------

    def attach(self, socket: WebSocket, wants_controller: bool) -> _Client | None:
        """Register a client; returns None when the controller seat is taken."""
        if wants_controller and self.controller is not None:
            return None
        client = _Client(socket, is_controller=wants_controller)
        self.clients.append(client)
        if wants_controller:
            self.controller = client
        return client

    def detach(self, client: _Client) -> None:
        if client in self.clients:
            self.clients.remove(client)
        if self.controller is client:
            self.controller = None


def create_app(
    model: RobotModel | None = None,
    params: wbc.WbcParams | None = None,
    tick_period: float = 0.1,
    static_dir: str | None = None,
    model_source: str | None = None,
) -> FastAPI:
    model = model or load_reference_model()
    params = params or wbc.load_params()
    server = TeleopServer(model, params, tick_period)
    app = FastAPI()
    app.state.server = server

    @app.on_event("startup")
    async def _start():
        server._loop_task = asyncio.create_task(server.run_loop())

    @app.on_event("shutdown")
    async def _stop():
        if server._loop_task:
            server._loop_task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await server._loop_task

    @app.get("/healthz")
    def healthz():
        return JSONResponse({"status": "ok", "params_hash": params.hash(), "model": model.name})

    @app.get("/model")
    def model_doc():
        # clients recompute forward kinematics locally from this document
        return JSONResponse(json.loads(Path(model_source or reference_model_path()).read_text()))

    @app.websocket("/ws")
    async def ws_endpoint(socket: WebSocket, role: str = "observer"):
        await socket.accept()
        client = server.attach(socket, wants_controller=(role == "controller"))
        if client is None:
            await socket.send_text(json.dumps({"type": "error", "error": "controller busy"}))
            await socket.close()
            return
        sender = asyncio.create_task(_pump(client))
        try:
            while True:
                raw = await socket.receive_text()
                try:
                    message = json.loads(raw)
                    if not isinstance(message, dict):
                        raise ValueError("message must be a JSON object")
                    if not client.is_controller and message.get("type") in COMMAND_TYPES:
                        raise ValueError("observer may not send commands")
                    reply = server.handle_command(message)
                except (ValueError, KeyError, TypeError) as e:
                    reply = {"type": "error", "error": str(e)}
                if reply is not None:
                    await socket.send_text(json.dumps(reply))
        except WebSocketDisconnect:
            pass
        finally:
            sender.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await sender
            server.detach(client)

    async def _pump(client: _Client):
        while True:
            text = await client.queue.get()
            await client.socket.send_text(text)

    static_root = Path(static_dir) if static_dir else Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if static_root.is_dir():
        app.mount("/", StaticFiles(directory=static_root, html=True), name="ui")
    return app
