import type { Prompt, RleMask, WirePrompts } from "./types";

/**
 * Annotation session state. Pure reducers: every transition returns a new
 * state object, so the UI is a function of (image, prompt stack, server
 * responses) and undo/redo is trivially correct.
 */

export interface SessionState {
  imageId: string | null;
  height: number;
  width: number;
  prompts: Prompt[];
  redoStack: Prompt[];
  /** Server-provided overlay for the current stack; never post-processed. */
  mask: RleMask | null;
  iou: number | null;
}

export function initialState(): SessionState {
  return { imageId: null, height: 0, width: 0, prompts: [], redoStack: [],
           mask: null, iou: null };
}

export function withImage(state: SessionState, imageId: string, height: number,
                          width: number): SessionState {
  // New image: prompts from the previous image do not carry over.
  return { ...initialState(), imageId, height, width };
}

export function pushPrompt(state: SessionState, prompt: Prompt): SessionState {
  return { ...state, prompts: [...state.prompts, prompt], redoStack: [] };
}

export function undo(state: SessionState): SessionState {
  if (state.prompts.length === 0) return state;
  const prompts = state.prompts.slice(0, -1);
  const undone = state.prompts[state.prompts.length - 1];
  const next: SessionState = { ...state, prompts,
                               redoStack: [...state.redoStack, undone] };
  if (prompts.length === 0) {
    next.mask = null;
    next.iou = null;
  }
  return next;
}

export function redo(state: SessionState): SessionState {
  if (state.redoStack.length === 0) return state;
  const redoStack = state.redoStack.slice(0, -1);
  const restored = state.redoStack[state.redoStack.length - 1];
  return { ...state, prompts: [...state.prompts, restored], redoStack };
}

export function withMask(state: SessionState, mask: RleMask, iou: number): SessionState {
  return { ...state, mask, iou };
}

export function canUndo(state: SessionState): boolean {
  return state.prompts.length > 0;
}

export function canRedo(state: SessionState): boolean {
  return state.redoStack.length > 0;
}

export function canExport(state: SessionState): boolean {
  return state.imageId !== null && state.mask !== null && state.prompts.length > 0;
}

/** Flatten the prompt stack into the /v1/predict payload shape. */
export function promptsToWire(prompts: Prompt[]): WirePrompts {
  const wire: WirePrompts = {};
  for (const p of prompts) {
    if (p.kind === "point") {
      (wire.points ??= []).push({ row: p.row, col: p.col, polarity: p.polarity });
    } else if (p.kind === "box") {
      (wire.boxes ??= []).push([p.r0, p.c0, p.r1, p.c1]);
    } else {
      wire.text = p.text; // the latest text prompt wins
    }
  }
  return wire;
}
