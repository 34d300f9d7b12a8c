/** Shared types mirroring the segmentation service wire formats. */

export interface RleMask {
  height: number;
  width: number;
  counts: number[];
}

export type Polarity = "fg" | "bg";

export type Prompt =
  | { kind: "point"; row: number; col: number; polarity: Polarity }
  | { kind: "box"; r0: number; c0: number; r1: number; c1: number }
  | { kind: "text"; text: string };

export type ToolMode = "fg-point" | "bg-point" | "box" | "text";

/** Wire shape of POST /v1/predict prompts. */
export interface WirePrompts {
  points?: { row: number; col: number; polarity: Polarity }[];
  boxes?: [number, number, number, number][];
  text?: string;
}

export interface PredictResponse {
  mask_rle: RleMask;
  iou_score: number;
  latency_ms: number;
}

export interface ImageResponse {
  image_id: string;
  height: number;
  width: number;
}
