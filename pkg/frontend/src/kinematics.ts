/**
 * Client-side forward kinematics, duplicated from the robot model document
 * so rendering needs no server round-trips. Conventions match the service:
 * quaternions [w,x,y,z] with w >= 0, configurations [x, y, yaw, arm...].
 */

export type Vec3 = [number, number, number];
export type Quat = [number, number, number, number];

export interface Pose {
  pos: Vec3;
  quat: Quat;
}

export interface JointDoc {
  name: string;
  parent_transform: { pos: number[]; quat: number[] };
  axis: number[];
  pos_limits: [number | null, number | null];
  vel_limit: number;
}

export interface GeomDoc {
  name: string;
  kind: string;
  radius: number;
  half_length?: number;
  frame: string;
  offset?: { pos: number[]; quat: number[] };
}

export interface ModelDoc {
  name: string;
  base: { pos_limits: [number | null, number | null][]; vel_limits: number[] };
  arm_joints: JointDoc[];
  ee_transform: { pos: number[]; quat: number[] };
  retract_posture: number[];
  fixed_frames?: { name: string; parent: string; transform: { pos: number[]; quat: number[] } }[];
  geoms?: GeomDoc[];
  collision_pairs?: [string, string][];
}

export const IDENTITY: Pose = { pos: [0, 0, 0], quat: [1, 0, 0, 0] };

export function quatMul(a: Quat, b: Quat): Quat {
  const [aw, ax, ay, az] = a;
  const [bw, bx, by, bz] = b;
  return [
    aw * bw - ax * bx - ay * by - az * bz,
    aw * bx + ax * bw + ay * bz - az * by,
    aw * by - ax * bz + ay * bw + az * bx,
    aw * bz + ax * by - ay * bx + az * bw,
  ];
}

export function quatRotate(q: Quat, v: Vec3): Vec3 {
  // v' = v + 2w (u x v) + 2 u x (u x v)
  const [w, ux, uy, uz] = q;
  const tx = 2 * (uy * v[2] - uz * v[1]);
  const ty = 2 * (uz * v[0] - ux * v[2]);
  const tz = 2 * (ux * v[1] - uy * v[0]);
  return [
    v[0] + w * tx + (uy * tz - uz * ty),
    v[1] + w * ty + (uz * tx - ux * tz),
    v[2] + w * tz + (ux * ty - uy * tx),
  ];
}

export function quatFromRotvec(v: Vec3): Quat {
  const angle = Math.hypot(v[0], v[1], v[2]);
  let scale: number;
  let w: number;
  if (angle < 1e-8) {
    scale = 0.5 - (angle * angle) / 48;
    w = 1 - (angle * angle) / 8;
  } else {
    scale = Math.sin(0.5 * angle) / angle;
    w = Math.cos(0.5 * angle);
  }
  let q: Quat = [w, v[0] * scale, v[1] * scale, v[2] * scale];
  if (q[0] < 0) q = [-q[0], -q[1], -q[2], -q[3]];
  const n = Math.hypot(q[0], q[1], q[2], q[3]);
  return [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
}

export function canonical(q: Quat): Quat {
  const n = Math.hypot(q[0], q[1], q[2], q[3]);
  let out: Quat = Math.abs(n - 1) > 1e-9 ? [q[0] / n, q[1] / n, q[2] / n, q[3] / n] : [...q];
  if (out[0] < 0) out = [-out[0], -out[1], -out[2], -out[3]];
  return out;
}

export function compose(a: Pose, b: Pose): Pose {
  const t = quatRotate(a.quat, b.pos);
  return {
    pos: [a.pos[0] + t[0], a.pos[1] + t[1], a.pos[2] + t[2]],
    quat: canonical(quatMul(a.quat, b.quat)),
  };
}

export function poseFromDoc(d: { pos: number[]; quat: number[] }): Pose {
  return { pos: [d.pos[0], d.pos[1], d.pos[2]], quat: canonical([d.quat[0], d.quat[1], d.quat[2], d.quat[3]]) };
}

export function aboutZ(angle: number): Quat {
  return quatFromRotvec([0, 0, angle]);
}

/** World pose of every frame (base, each joint, fixed frames, "ee"). */
export function forwardKinematics(model: ModelDoc, q: number[]): Map<string, Pose> {
  const dof = 3 + model.arm_joints.length;
  if (q.length !== dof) throw new Error(`config length ${q.length} does not match ${dof} DoF`);
  const frames = new Map<string, Pose>();
  let parent: Pose = { pos: [q[0], q[1], 0], quat: aboutZ(q[2]) };
  frames.set("base", parent);
  model.arm_joints.forEach((joint, i) => {
    const spin: Pose = {
      pos: [0, 0, 0],
      quat: quatFromRotvec([joint.axis[0] * q[3 + i], joint.axis[1] * q[3 + i], joint.axis[2] * q[3 + i]]),
    };
    parent = compose(compose(parent, poseFromDoc(joint.parent_transform)), spin);
    frames.set(joint.name, parent);
  });
  frames.set("ee", compose(parent, poseFromDoc(model.ee_transform)));
  for (const f of model.fixed_frames ?? []) {
    const p = frames.get(f.parent);
    if (!p) throw new Error(`fixed frame ${f.name} has unknown parent ${f.parent}`);
    frames.set(f.name, compose(p, poseFromDoc(f.transform)));
  }
  return frames;
}

export function poseDistance(a: Pose, b: Pose): number {
  return Math.hypot(a.pos[0] - b.pos[0], a.pos[1] - b.pos[1], a.pos[2] - b.pos[2]);
}
