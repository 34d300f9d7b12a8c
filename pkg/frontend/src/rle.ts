import type { RleMask } from "./types";

/**
 * Run-length mask codec, identical to the server's wire format: row-major
 * runs alternating background/foreground, starting with a background run
 * (first count may be 0).
 */

export function decodeRle(rle: RleMask): Uint8Array {
  const { height, width, counts } = rle;
  const total = height * width;
  const sum = counts.reduce((a, b) => a + b, 0);
  if (sum !== total) {
    throw new Error(`RLE counts sum ${sum} != ${total} pixels`);
  }
  const out = new Uint8Array(total);
  let pos = 0;
  let value = 0;
  for (const count of counts) {
    if (count < 0) throw new Error("negative run length");
    if (value === 1) out.fill(1, pos, pos + count);
    pos += count;
    value = 1 - value;
  }
  return out;
}

export function encodeRle(mask: Uint8Array, height: number, width: number): RleMask {
  if (mask.length !== height * width) {
    throw new Error(`mask length ${mask.length} != ${height * width}`);
  }
  const counts: number[] = [];
  let current = 0; // runs start with background
  let run = 0;
  for (let i = 0; i < mask.length; i++) {
    const v = mask[i] ? 1 : 0;
    if (v === current) {
      run++;
    } else {
      counts.push(run);
      current = v;
      run = 1;
    }
  }
  counts.push(run);
  return { height, width, counts };
}

export function maskArea(rle: RleMask): number {
  let area = 0;
  let foreground = false;
  for (const count of rle.counts) {
    if (foreground) area += count;
    foreground = !foreground;
  }
  return area;
}
