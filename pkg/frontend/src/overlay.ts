import type { Prompt, RleMask } from "./types";
import { decodeRle } from "./rle";

/** Mask and prompt-glyph rendering onto the overlay canvas. */

const MASK_RGBA: [number, number, number, number] = [66, 135, 245, 110];

export function maskToImageData(rle: RleMask): ImageData {
  const bits = decodeRle(rle);
  const data = new Uint8ClampedArray(rle.width * rle.height * 4);
  const [r, g, b, a] = MASK_RGBA;
  for (let i = 0; i < bits.length; i++) {
    if (bits[i]) {
      const j = i * 4;
      data[j] = r;
      data[j + 1] = g;
      data[j + 2] = b;
      data[j + 3] = a;
    }
  }
  return new ImageData(data, rle.width, rle.height);
}

export function drawPromptGlyphs(ctx: CanvasRenderingContext2D, prompts: Prompt[],
                                 scale: number): void {
  for (const p of prompts) {
    if (p.kind === "point") {
      ctx.beginPath();
      ctx.arc(p.col * scale, p.row * scale, 4, 0, 2 * Math.PI);
      ctx.fillStyle = p.polarity === "fg" ? "#2ecc40" : "#ff4136";
      ctx.fill();
      ctx.strokeStyle = "white";
      ctx.lineWidth = 1.5;
      ctx.stroke();
    } else if (p.kind === "box") {
      ctx.strokeStyle = "#ffdc00";
      ctx.lineWidth = 2;
      ctx.strokeRect(p.c0 * scale, p.r0 * scale,
                     (p.c1 - p.c0) * scale, (p.r1 - p.r0) * scale);
    }
    // text prompts have no spatial glyph
  }
}
