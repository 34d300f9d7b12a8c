import type { Prompt, RleMask } from "./types";
import { decodeRle } from "./rle";

/** Downloadable annotation payload: server mask plus the prompt history. */
export interface AnnotationExport {
  image_id: string;
  mask_rle: RleMask;
  iou_score: number | null;
  prompts: Prompt[];
}

export function buildExport(imageId: string, mask: RleMask, iou: number | null,
                            prompts: Prompt[]): AnnotationExport {
  return {
    image_id: imageId,
    mask_rle: { height: mask.height, width: mask.width, counts: [...mask.counts] },
    iou_score: iou,
    prompts: prompts.map((p) => ({ ...p })),
  };
}

export function parseExport(json: string): AnnotationExport {
  const obj = JSON.parse(json) as AnnotationExport;
  if (!obj.image_id || !obj.mask_rle || !Array.isArray(obj.prompts)) {
    throw new Error("not an annotation export");
  }
  decodeRle(obj.mask_rle); // validates counts against dims
  return obj;
}
