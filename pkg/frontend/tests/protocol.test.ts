import { describe, expect, it } from "vitest";

import { PROTOCOL_VERSION, parseServerMessage } from "../src/protocol.js";

describe("protocol parsing", () => {
  it("is version 1", () => {
    expect(PROTOCOL_VERSION).toBe(1);
  });

  it("accepts every server message kind", () => {
    for (const type of ["created", "ok", "stepped", "params_ack", "subscribed",
                        "frame", "contours", "series", "snapshot", "error"]) {
      expect(parseServerMessage({ type }).type).toBe(type);
    }
  });

  it("rejects junk", () => {
    expect(() => parseServerMessage(null)).toThrow();
    expect(() => parseServerMessage([1, 2])).toThrow();
    expect(() => parseServerMessage({})).toThrow();
    expect(() => parseServerMessage({ type: "warp" })).toThrow();
    expect(() => parseServerMessage("frame")).toThrow();
  });
});
