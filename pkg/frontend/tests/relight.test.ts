import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { clampToDisc, relight } from "../src/relight";
import { decodeRtiptm } from "../src/rtiptm";

const FIXTURES = join(__dirname, "fixtures");

const ptm = decodeRtiptm(
  new Uint8Array(readFileSync(join(FIXTURES, "fixture.rtiptm"))),
);

function readU8(name: string): Uint8Array {
  return new Uint8Array(readFileSync(join(FIXTURES, name)));
}

describe("clampToDisc", () => {
  it("passes interior points through unchanged", () => {
    expect(clampToDisc(0.3, -0.4)).toEqual([0.3, -0.4]);
    expect(clampToDisc(0, 0)).toEqual([0, 0]);
  });

  it("projects exterior points onto the boundary", () => {
    const [lu, lv] = clampToDisc(3, 4);
    expect(lu).toBeCloseTo(0.6, 12);
    expect(lv).toBeCloseTo(0.8, 12);
    expect(Math.hypot(lu, lv)).toBeCloseTo(1.0, 12);
  });
});

describe("relight", () => {
  it("matches the alpha6 image pixel-exactly at the origin", () => {
    const frame = relight(ptm, 0, 0);
    const expected = readU8("alpha6.bin");
    expect(frame).toEqual(expected);
  });

  it("matches the reference within 1 quantization step on a 25-vector grid", () => {
    const grid = JSON.parse(
      readFileSync(join(FIXTURES, "relight_grid.json"), "utf8"),
    ) as { width: number; height: number; vectors: { lu: number; lv: number }[] };
    expect(grid.vectors).toHaveLength(25);
    let worst = 0;
    grid.vectors.forEach((vec, k) => {
      const frame = relight(ptm, vec.lu, vec.lv);
      const expected = readU8(
        `relight_${String(k).padStart(2, "0")}.bin`,
      );
      expect(frame.length).toBe(expected.length);
      for (let i = 0; i < frame.length; i++) {
        worst = Math.max(worst, Math.abs(frame[i] - expected[i]));
      }
    });
    expect(worst).toBeLessThanOrEqual(1);
  });

  it("reproduces a fitting-time capture within 3/255 mean abs error", () => {
    const meta = JSON.parse(
      readFileSync(join(FIXTURES, "capture0.json"), "utf8"),
    ) as { lu: number; lv: number };
    const frame = relight(ptm, meta.lu, meta.lv);
    const capture = readU8("capture0.bin");
    let total = 0;
    for (let i = 0; i < frame.length; i++) {
      total += Math.abs(frame[i] - capture[i]);
    }
    expect(total / frame.length).toBeLessThanOrEqual(3.0);
  });
});
