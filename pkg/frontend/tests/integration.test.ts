/**
 * End-to-end check against the real Python service: connect as controller,
 * engage the clutch, drag the target 5 cm, and watch the state stream until
 * the end-effector lands within 1e-3 m; record over the socket and verify
 * the episode replays with zero deviation.
 */

import { ChildProcess, spawn, spawnSync } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import WebSocket from "ws";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { CockpitSession, Transport } from "../src/session.js";
import { StateMessage, parseServerMessage } from "../src/protocol.js";

const PORT = 8744;
const BASE = `http://127.0.0.1:${PORT}`;
const REPO_ROOT = join(__dirname, "..", "..");

let server: ChildProcess;

async function waitForHealth(timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const res = await fetch(`${BASE}/healthz`);
      if (res.ok) return;
    } catch {
      /* not up yet */
    }
    await new Promise((r) => setTimeout(r, 200));
  }
  throw new Error("service did not come up");
}

beforeAll(async () => {
  server = spawn("python3", ["-m", "mobman.cli", "serve", "--port", String(PORT)], {
    cwd: REPO_ROOT,
    stdio: "ignore",
  });
  await waitForHealth(20000);
}, 30000);

afterAll(() => {
  server?.kill();
});

function connectController(): Promise<{ socket: WebSocket; session: CockpitSession; states: StateMessage[] }> {
  return new Promise((resolve, reject) => {
    const socket = new WebSocket(`ws://127.0.0.1:${PORT}/ws?role=controller`);
    const transport: Transport = {
      send: (m) => socket.send(JSON.stringify(m)),
      connected: () => socket.readyState === WebSocket.OPEN,
    };
    const session = new CockpitSession(transport);
    const states: StateMessage[] = [];
    socket.on("message", (data) => {
      const msg = parseServerMessage(data.toString());
      if (msg.type === "state") {
        states.push(msg);
        session.onState(msg);
      } else if (msg.type === "record") {
        session.onRecordReply(msg.status);
      }
    });
    socket.on("open", () => resolve({ socket, session, states }));
    socket.on("error", reject);
  });
}

async function until(cond: () => boolean, timeoutMs: number): Promise<boolean> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (cond()) return true;
    await new Promise((r) => setTimeout(r, 50));
  }
  return cond();
}

describe("cockpit against the live service", () => {
  it(
    "drag 5 cm converges to < 1e-3 m and recordings replay exactly",
    async () => {
      const { socket, session, states } = await connectController();
      try {
        await until(() => states.length > 0, 5000);
        expect(states.length).toBeGreaterThan(0);

        // start recording into a temp file served back to the replay CLI
        const dir = mkdtempSync(join(tmpdir(), "teleop-"));
        const episode = join(dir, "episode.jsonl");
        session.toggleRecord(episode);
        await until(() => session.recording, 3000);
        expect(session.recording).toBe(true);

        // clutch in, drag the end-effector 5 cm along world x
        session.engageClutch();
        const start = session.state!.ee_pose.pos;
        const goalX = start[0] + 0.05;
        for (let i = 0; i < 5; i++) {
          session.drag([0.01, 0, 0]);
          session.flush();
          await new Promise((r) => setTimeout(r, 60)); // respect the 50 ms limit
        }
        session.flush();

        const reached = await until(() => {
          const s = session.state;
          if (!s) return false;
          const e = Math.hypot(s.ee_pose.pos[0] - goalX, s.ee_pose.pos[1] - start[1], s.ee_pose.pos[2] - start[2]);
          return e < 1e-3;
        }, 3000);
        expect(reached).toBe(true);

        // stop recording; the file must replay with zero deviation
        session.toggleRecord();
        await until(() => !session.recording, 3000);
        expect(session.recording).toBe(false);

        const replay = spawnSync(
          "python3",
          ["-m", "mobman.cli", "replay", "--episode", episode, "--tolerance", "0"],
          { cwd: REPO_ROOT, encoding: "utf-8" },
        );
        expect(replay.stderr).toBe("");
        expect(replay.stdout).toContain("max_deviation=0.000e+00");
        expect(replay.status).toBe(0);
      } finally {
        socket.close();
      }
    },
    30000,
  );

  it("second controller seat is rejected while the first is held", async () => {
    const first = await connectController();
    try {
      const rejected = await new Promise<string>((resolve, reject) => {
        const socket = new WebSocket(`ws://127.0.0.1:${PORT}/ws?role=controller`);
        socket.on("message", (data) => {
          const msg = parseServerMessage(data.toString());
          if (msg.type === "error") resolve(msg.error);
        });
        socket.on("error", reject);
        setTimeout(() => reject(new Error("no rejection")), 5000);
      });
      expect(rejected).toContain("busy");
    } finally {
      first.socket.close();
    }
  }, 15000);
});
