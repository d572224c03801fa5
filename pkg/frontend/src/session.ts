/**
 * Cockpit session logic: clutch-based relative teleoperation, target-rate
 * limiting, latest-state buffering, and recording state.
 *
 * Pure of any DOM or socket dependency: the transport and the clock are
 * injected, so the invariants are unit-testable.
 */

import { Pose, Quat, Vec3, canonical, quatMul } from "./kinematics.js";
import { CommandMessage, StateMessage } from "./protocol.js";

export const TARGET_MIN_INTERVAL_MS = 50; // at most one target_pose per 50 ms
export const DISCONNECT_BUFFER_MS = 1000; // inputs buffered this long, then dropped

export interface Transport {
  send(message: CommandMessage): void;
  connected(): boolean;
}

export type Banner = (text: string) => void;

export class CockpitSession {
  private latest: StateMessage | null = null;
  private clutchAnchor: Pose | null = null;
  private dragTranslation: Vec3 = [0, 0, 0];
  private dragRotation: Quat = [1, 0, 0, 0];
  private lastSentMs = -Infinity;
  private pendingTarget: { pose: Pose; atMs: number } | null = null;
  recording = false;

  constructor(
    private transport: Transport,
    private banner: Banner = () => {},
    private now: () => number = () => Date.now(),
  ) {}

  /** Latest-state buffer: rendering reads this, decoupled from arrival. */
  get state(): StateMessage | null {
    return this.latest;
  }

  get clutchEngaged(): boolean {
    return this.clutchAnchor !== null;
  }

  onState(msg: StateMessage): void {
    this.latest = msg;
  }

  onRecordReply(status: "started" | "stopped"): void {
    this.recording = status === "started";
  }

  /** Anchor the target at the EE pose as of engagement; zero drag. */
  engageClutch(): void {
    if (!this.latest) {
      this.banner("no robot state yet");
      return;
    }
    const ee = this.latest.ee_pose;
    this.clutchAnchor = { pos: [...ee.pos] as Vec3, quat: canonical([...ee.quat] as Quat) };
    this.dragTranslation = [0, 0, 0];
    this.dragRotation = [1, 0, 0, 0];
    this.pushTarget();
  }

  disengageClutch(): void {
    this.clutchAnchor = null;
    this.pendingTarget = null;
  }

  /** Current target: anchor with the drag applied in the world frame. */
  targetPose(): Pose | null {
    if (!this.clutchAnchor) return null;
    const a = this.clutchAnchor;
    return {
      pos: [
        a.pos[0] + this.dragTranslation[0],
        a.pos[1] + this.dragTranslation[1],
        a.pos[2] + this.dragTranslation[2],
      ],
      quat: canonical(quatMul(this.dragRotation, a.quat)),
    };
  }

  /** Accumulate a world-frame drag delta; no-op while disengaged. */
  drag(delta: Vec3, rotation: Quat = [1, 0, 0, 0]): void {
    if (!this.clutchAnchor) return; // never send targets while disengaged
    this.dragTranslation = [
      this.dragTranslation[0] + delta[0],
      this.dragTranslation[1] + delta[1],
      this.dragTranslation[2] + delta[2],
    ];
    this.dragRotation = canonical(quatMul(rotation, this.dragRotation));
    this.pushTarget();
  }

  /** Absolute target entry (side panel); requires the clutch too. */
  setAbsoluteTarget(pose: Pose): void {
    if (!this.latest) return;
    this.clutchAnchor = { pos: [...pose.pos] as Vec3, quat: canonical([...pose.quat] as Quat) };
    this.dragTranslation = [0, 0, 0];
    this.dragRotation = [1, 0, 0, 0];
    this.pushTarget();
  }

  private pushTarget(): void {
    const pose = this.targetPose();
    if (!pose) return;
    const t = this.now();
    if (!this.transport.connected()) {
      this.pendingTarget = { pose, atMs: t };
      return;
    }
    if (t - this.lastSentMs < TARGET_MIN_INTERVAL_MS) {
      this.pendingTarget = { pose, atMs: t }; // latest-wins, flushed later
      return;
    }
    this.sendTarget(pose, t);
  }

  /** Call periodically (e.g. per animation frame) to flush rate-limited
   * or reconnect-buffered targets; drops stale buffered input. */
  flush(): void {
    if (!this.pendingTarget) return;
    const t = this.now();
    if (!this.transport.connected()) {
      if (t - this.pendingTarget.atMs > DISCONNECT_BUFFER_MS) {
        this.pendingTarget = null;
        this.banner("disconnected: input dropped");
      }
      return;
    }
    if (t - this.lastSentMs >= TARGET_MIN_INTERVAL_MS && this.clutchAnchor) {
      this.sendTarget(this.pendingTarget.pose, t);
      this.pendingTarget = null;
    }
  }

  private sendTarget(pose: Pose, t: number): void {
    this.transport.send({ type: "target_pose", pos: pose.pos, quat: pose.quat });
    this.lastSentMs = t;
    this.pendingTarget = null;
  }

  setGripper(value: number): void {
    this.transport.send({ type: "gripper", value });
  }

  setMode(mode: "keypose" | "dense" | "terminate"): void {
    if (mode === "terminate") this.disengageClutch();
    this.transport.send({ type: "mode", mode });
  }

  toggleRecord(path?: string): void {
    this.transport.send({ type: "record", action: this.recording ? "stop" : "start", path });
  }
}
