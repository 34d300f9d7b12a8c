import { describe, expect, it } from "vitest";
import { decodeRle, encodeRle, maskArea } from "./rle";

describe("rle codec", () => {
  it("round-trips random masks", () => {
    let seed = 42;
    const rand = () => {
      seed = (seed * 1103515245 + 12345) & 0x7fffffff;
      return seed / 0x7fffffff;
    };
    for (let trial = 0; trial < 30; trial++) {
      const h = 1 + Math.floor(rand() * 20);
      const w = 1 + Math.floor(rand() * 20);
      const mask = new Uint8Array(h * w);
      for (let i = 0; i < mask.length; i++) mask[i] = rand() > 0.5 ? 1 : 0;
      const rle = encodeRle(mask, h, w);
      expect(Array.from(decodeRle(rle))).toEqual(Array.from(mask));
    }
  });

  it("starts with a background run", () => {
    const mask = new Uint8Array([1, 1, 0, 0]);
    expect(encodeRle(mask, 2, 2).counts).toEqual([0, 2, 2]);
  });

  it("encodes all-background and all-foreground", () => {
    expect(encodeRle(new Uint8Array(6), 2, 3).counts).toEqual([6]);
    expect(encodeRle(new Uint8Array(6).fill(1), 2, 3).counts).toEqual([0, 6]);
  });

  it("matches the server convention on a hand case", () => {
    // row-major 2x3 with foreground at (0,2) and (1,0): 0 0 1 1 0 0
    const mask = new Uint8Array([0, 0, 1, 1, 0, 0]);
    expect(encodeRle(mask, 2, 3).counts).toEqual([2, 2, 2]);
  });

  it("rejects inconsistent counts", () => {
    expect(() => decodeRle({ height: 2, width: 2, counts: [1] })).toThrow();
  });

  it("computes mask area from runs", () => {
    expect(maskArea({ height: 2, width: 3, counts: [2, 2, 2] })).toBe(2);
    expect(maskArea({ height: 2, width: 2, counts: [4] })).toBe(0);
  });
});
