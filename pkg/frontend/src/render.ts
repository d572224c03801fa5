/**
 * View-model derivation and canvas painting. The decision logic (badge
 * levels, control enablement, link segments) is pure and unit-tested; the
 * painting functions only translate view-models onto 2D contexts.
 */

import { ModelDoc, Pose, forwardKinematics, quatRotate } from "./kinematics.js";
import { CollisionEntry, StateMessage } from "./protocol.js";

export const COLLISION_WARN_DISTANCE = 0.04; // 2x the controller safety margin

export type BadgeLevel = "ok" | "warning";

export interface CollisionBadge {
  label: string;
  distance: number;
  level: BadgeLevel;
}

export function collisionBadges(entries: CollisionEntry[]): CollisionBadge[] {
  return entries.map((e) => ({
    label: `${e.pair[0]} / ${e.pair[1]}`,
    distance: e.d,
    level: e.d < COLLISION_WARN_DISTANCE ? "warning" : "ok",
  }));
}

export function controlsDisabled(mode: StateMessage["mode"]): boolean {
  return mode === "terminate";
}

export interface LinkSegment {
  from: [number, number, number];
  to: [number, number, number];
  name: string;
}

/** Polyline of the kinematic chain in world coordinates. */
export function chainSegments(model: ModelDoc, q: number[]): LinkSegment[] {
  const frames = forwardKinematics(model, q);
  const order = ["base", ...model.arm_joints.map((j) => j.name), "ee"];
  const segments: LinkSegment[] = [];
  for (let i = 1; i < order.length; i++) {
    const a = frames.get(order[i - 1])!;
    const b = frames.get(order[i])!;
    segments.push({ from: [...a.pos], to: [...b.pos], name: order[i] });
  }
  return segments;
}

export interface ViewModel {
  segments: LinkSegment[];
  eePose: Pose;
  targetPose: Pose | null;
  baseXY: [number, number];
  baseYaw: number;
  badges: CollisionBadge[];
  mode: StateMessage["mode"];
  gripper: number;
  disabled: boolean;
  tick: number;
}

export function buildViewModel(model: ModelDoc, state: StateMessage, target: Pose | null): ViewModel {
  return {
    segments: chainSegments(model, state.q),
    eePose: { pos: [...state.ee_pose.pos], quat: [...state.ee_pose.quat] },
    targetPose: target,
    baseXY: [state.q[0], state.q[1]],
    baseYaw: state.q[2],
    badges: collisionBadges(state.collision),
    mode: state.mode,
    gripper: state.gripper,
    disabled: controlsDisabled(state.mode),
    tick: state.tick,
  };
}

// ---------------------------------------------------------------------------
// Canvas painting (browser only)

interface Camera2D {
  scale: number; // pixels per meter
  cx: number;
  cy: number;
}

function project(cam: Camera2D, u: number, v: number): [number, number] {
  return [cam.cx + u * cam.scale, cam.cy - v * cam.scale];
}

/** Top-down view: world x right, world y up; base footprint + chain. */
export function paintTopDown(ctx: CanvasRenderingContext2D, vm: ViewModel): void {
  const cam: Camera2D = { scale: 120, cx: ctx.canvas.width / 2, cy: ctx.canvas.height / 2 };
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
  ctx.save();
  const [bx, by] = project(cam, vm.baseXY[0], vm.baseXY[1]);
  ctx.strokeStyle = "#8ab";
  ctx.beginPath();
  ctx.arc(bx, by, 0.2 * cam.scale, 0, 2 * Math.PI);
  ctx.stroke();
  ctx.beginPath();
  ctx.moveTo(bx, by);
  ctx.lineTo(bx + 0.2 * cam.scale * Math.cos(vm.baseYaw), by - 0.2 * cam.scale * Math.sin(vm.baseYaw));
  ctx.stroke();
  ctx.strokeStyle = "#def";
  ctx.lineWidth = 2;
  ctx.beginPath();
  for (const s of vm.segments) {
    ctx.moveTo(...project(cam, s.from[0], s.from[1]));
    ctx.lineTo(...project(cam, s.to[0], s.to[1]));
  }
  ctx.stroke();
  if (vm.targetPose) {
    const [tx, ty] = project(cam, vm.targetPose.pos[0], vm.targetPose.pos[1]);
    ctx.strokeStyle = "#fa0";
    ctx.strokeRect(tx - 4, ty - 4, 8, 8);
  }
  ctx.restore();
}

/** Side view (world x right, z up) standing in for the 3D arm view. */
export function paintSide(ctx: CanvasRenderingContext2D, vm: ViewModel): void {
  const cam: Camera2D = { scale: 160, cx: ctx.canvas.width / 2, cy: ctx.canvas.height - 30 };
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
  ctx.save();
  ctx.strokeStyle = "#456";
  ctx.beginPath();
  ctx.moveTo(0, cam.cy);
  ctx.lineTo(ctx.canvas.width, cam.cy);
  ctx.stroke();
  ctx.strokeStyle = "#def";
  ctx.lineWidth = 3;
  ctx.beginPath();
  for (const s of vm.segments) {
    ctx.moveTo(...project(cam, s.from[0], s.from[2]));
    ctx.lineTo(...project(cam, s.to[0], s.to[2]));
  }
  ctx.stroke();
  // EE triad: x axis of the EE frame
  const ax = quatRotate(vm.eePose.quat, [0.08, 0, 0]);
  const [ex, ez] = project(cam, vm.eePose.pos[0], vm.eePose.pos[2]);
  ctx.strokeStyle = "#e66";
  ctx.beginPath();
  ctx.moveTo(ex, ez);
  ctx.lineTo(...project(cam, vm.eePose.pos[0] + ax[0], vm.eePose.pos[2] + ax[2]));
  ctx.stroke();
  if (vm.targetPose) {
    const [tx, tz] = project(cam, vm.targetPose.pos[0], vm.targetPose.pos[2]);
    ctx.strokeStyle = "#fa0";
    ctx.strokeRect(tx - 4, tz - 4, 8, 8);
  }
  ctx.restore();
}
