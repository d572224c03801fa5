import { describe, expect, it } from "vitest";

import { SchemaError, parseServerMessage } from "../src/protocol.js";

const state = JSON.stringify({
  type: "state",
  tick: 3,
  q: [0, 0, 0, 0.1],
  ee_pose: { pos: [1, 2, 3], quat: [1, 0, 0, 0] },
  gripper: 0.5,
  mode: "keypose",
  collision: [{ pair: ["a", "b"], d: 0.05 }],
});

describe("parseServerMessage", () => {
  it("parses a state message", () => {
    const msg = parseServerMessage(state);
    expect(msg.type).toBe("state");
    if (msg.type === "state") {
      expect(msg.tick).toBe(3);
      expect(msg.collision[0].d).toBeCloseTo(0.05);
    }
  });

  it("ignores unknown fields", () => {
    const doc = { ...JSON.parse(state), extra: 42 };
    expect(parseServerMessage(JSON.stringify(doc)).type).toBe("state");
  });

  it("parses error and record replies", () => {
    expect(parseServerMessage('{"type":"error","error":"x"}')).toEqual({ type: "error", error: "x" });
    expect(parseServerMessage('{"type":"record","status":"stopped","ticks":7}')).toEqual({
      type: "record",
      status: "stopped",
      ticks: 7,
    });
  });

  it.each([
    "not json",
    "{}",
    '{"type":"state","tick":"x"}',
    '{"type":"state","tick":1,"q":[0],"mode":"sideways","ee_pose":{"pos":[0,0,0],"quat":[1,0,0,0]}}',
    '{"type":"mystery"}',
  ])("rejects malformed input %#", (raw) => {
    expect(() => parseServerMessage(raw)).toThrow(SchemaError);
  });
});
