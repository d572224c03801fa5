/**
 * Wire protocol shared with the teleoperation service.
 *
 * Poses serialize as {pos: [x,y,z], quat: [w,x,y,z]} everywhere; unknown
 * fields in incoming messages are ignored, unknown message types rejected.
 */

export interface PoseJson {
  pos: [number, number, number];
  quat: [number, number, number, number];
}

export interface CollisionEntry {
  pair: [string, string];
  d: number;
}

export interface StateMessage {
  type: "state";
  tick: number;
  q: number[];
  ee_pose: PoseJson;
  gripper: number;
  mode: "keypose" | "dense" | "terminate";
  collision: CollisionEntry[];
}

export interface ErrorMessage {
  type: "error";
  error: string;
}

export interface RecordReply {
  type: "record";
  status: "started" | "stopped";
  ticks?: number;
}

export type ServerMessage = StateMessage | ErrorMessage | RecordReply;

export type CommandMessage =
  | ({ type: "target_pose" } & PoseJson)
  | { type: "gripper"; value: number }
  | { type: "mode"; mode: "keypose" | "dense" | "terminate" }
  | { type: "record"; action: "start" | "stop"; path?: string }
  | { type: "reset" };

export class SchemaError extends Error {}

function isFiniteArray(v: unknown, n: number): v is number[] {
  return Array.isArray(v) && v.length === n && v.every((x) => typeof x === "number" && Number.isFinite(x));
}

export function parsePose(v: unknown): PoseJson {
  const p = v as Partial<PoseJson>;
  if (!p || !isFiniteArray(p.pos, 3) || !isFiniteArray(p.quat, 4)) {
    throw new SchemaError("bad pose");
  }
  return { pos: p.pos as PoseJson["pos"], quat: p.quat as PoseJson["quat"] };
}

/** Parse one server message; throws SchemaError on anything malformed. */
export function parseServerMessage(raw: string): ServerMessage {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    throw new SchemaError("not JSON");
  }
  const m = doc as Record<string, unknown>;
  if (!m || typeof m.type !== "string") throw new SchemaError("missing type");
  if (m.type === "error") {
    if (typeof m.error !== "string") throw new SchemaError("error message without text");
    return { type: "error", error: m.error };
  }
  if (m.type === "record") {
    if (m.status !== "started" && m.status !== "stopped") throw new SchemaError("bad record status");
    return { type: "record", status: m.status, ticks: typeof m.ticks === "number" ? m.ticks : undefined };
  }
  if (m.type === "state") {
    if (typeof m.tick !== "number" || !Array.isArray(m.q)) throw new SchemaError("bad state");
    if (m.mode !== "keypose" && m.mode !== "dense" && m.mode !== "terminate") throw new SchemaError("bad mode");
    const collision = Array.isArray(m.collision)
      ? m.collision.map((c) => {
          const e = c as Partial<CollisionEntry>;
          if (!Array.isArray(e.pair) || e.pair.length !== 2 || typeof e.d !== "number") {
            throw new SchemaError("bad collision entry");
          }
          return { pair: [String(e.pair[0]), String(e.pair[1])] as [string, string], d: e.d };
        })
      : [];
    return {
      type: "state",
      tick: m.tick,
      q: (m.q as unknown[]).map(Number),
      ee_pose: parsePose(m.ee_pose),
      gripper: typeof m.gripper === "number" ? m.gripper : 0,
      mode: m.mode,
      collision,
    };
  }
  throw new SchemaError(`unknown message type ${String(m.type)}`);
}
