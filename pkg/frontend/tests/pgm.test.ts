import { describe, expect, it } from "vitest";

import { decodeBase64, decodePgm, decodePgmBase64 } from "../src/pgm.js";

function pgmBytes(width: number, height: number, raster: number[]): Uint8Array {
  const header = new TextEncoder().encode(`P5\n${width} ${height}\n255\n`);
  const out = new Uint8Array(header.length + raster.length);
  out.set(header);
  out.set(raster, header.length);
  return out;
}

describe("PGM decoding", () => {
  it("decodes the raster byte for byte", () => {
    const raster = [0, 37, 128, 255, 1, 2];
    const frame = decodePgm(pgmBytes(3, 2, raster));
    expect(frame.width).toBe(3);
    expect(frame.height).toBe(2);
    expect(Array.from(frame.pixels)).toEqual(raster);
  });

  it("round-trips through base64", () => {
    const bytes = pgmBytes(2, 2, [10, 20, 30, 40]);
    const b64 = Buffer.from(bytes).toString("base64");
    expect(Array.from(decodeBase64(b64))).toEqual(Array.from(bytes));
    const frame = decodePgmBase64(b64);
    expect(Array.from(frame.pixels)).toEqual([10, 20, 30, 40]);
  });

  it("rejects non-P5 payloads", () => {
    expect(() => decodePgm(new TextEncoder().encode("P2\n1 1\n255\n0"))).toThrow();
  });

  it("rejects truncated rasters", () => {
    const bytes = pgmBytes(4, 4, [1, 2, 3]);
    expect(() => decodePgm(bytes)).toThrow(/truncated/);
  });

  it("rejects unexpected depth", () => {
    const header = new TextEncoder().encode("P5\n1 1\n65535\n");
    const out = new Uint8Array(header.length + 2);
    out.set(header);
    expect(() => decodePgm(out)).toThrow(/header/);
  });
});
