import { ApiClient } from "./api";
import { buildExport, parseExport } from "./export";
import { drawPromptGlyphs, maskToImageData } from "./overlay";
import { CoalescingQueue } from "./queue";
import {
  SessionState, canExport, canRedo, canUndo, initialState, promptsToWire,
  pushPrompt, redo, undo, withImage, withMask,
} from "./state";
import type { Prompt, PredictResponse, ToolMode, WirePrompts } from "./types";

const api = new ApiClient();

let state: SessionState = initialState();
let tool: ToolMode = "fg-point";
let imageBitmap: ImageBitmap | null = null;
let dragStart: { row: number; col: number } | null = null;

const el = {
  file: document.getElementById("file") as HTMLInputElement,
  importFile: document.getElementById("import-file") as HTMLInputElement,
  canvas: document.getElementById("image-canvas") as HTMLCanvasElement,
  overlay: document.getElementById("overlay-canvas") as HTMLCanvasElement,
  tools: Array.from(document.querySelectorAll<HTMLButtonElement>("[data-tool]")),
  textInput: document.getElementById("text-prompt") as HTMLInputElement,
  textAdd: document.getElementById("add-text") as HTMLButtonElement,
  undo: document.getElementById("undo") as HTMLButtonElement,
  redo: document.getElementById("redo") as HTMLButtonElement,
  exportBtn: document.getElementById("export") as HTMLButtonElement,
  status: document.getElementById("status") as HTMLElement,
  toast: document.getElementById("toast") as HTMLElement,
};

const DISPLAY_SCALE = 6; // CSS pixels per image pixel

function toast(message: string): void {
  el.toast.textContent = message;
  el.toast.classList.add("visible");
  window.setTimeout(() => el.toast.classList.remove("visible"), 4000);
}

const predictQueue = new CoalescingQueue<WirePrompts, PredictResponse>(
  (prompts) => {
    if (!state.imageId) throw new Error("no image loaded");
    return api.predict(state.imageId, prompts);
  },
  (_payload, res) => {
    state = withMask(state, res.mask_rle, res.iou_score);
    el.status.textContent =
      `quality ${res.iou_score.toFixed(3)} - ${res.latency_ms.toFixed(0)} ms`;
    render();
  },
  (_payload, err) => toast(String(err)),
);

function requestPrediction(): void {
  if (!state.imageId) return;
  if (state.prompts.length === 0) {
    render();
    return;
  }
  predictQueue.submit(promptsToWire(state.prompts));
}

function setCanvasSize(canvas: HTMLCanvasElement, w: number, h: number): void {
  const dpr = window.devicePixelRatio || 1;
  canvas.style.width = `${w * DISPLAY_SCALE}px`;
  canvas.style.height = `${h * DISPLAY_SCALE}px`;
  canvas.width = Math.round(w * DISPLAY_SCALE * dpr);
  canvas.height = Math.round(h * DISPLAY_SCALE * dpr);
}

function render(): void {
  const dpr = window.devicePixelRatio || 1;
  const octx = el.overlay.getContext("2d")!;
  octx.setTransform(dpr, 0, 0, dpr, 0, 0);
  octx.clearRect(0, 0, el.overlay.width, el.overlay.height);
  if (state.mask) {
    // The server mask is rendered verbatim (no client-side post-processing),
    // scaled up through an offscreen canvas at native mask resolution.
    const off = document.createElement("canvas");
    off.width = state.mask.width;
    off.height = state.mask.height;
    off.getContext("2d")!.putImageData(maskToImageData(state.mask), 0, 0);
    octx.imageSmoothingEnabled = false;
    octx.drawImage(off, 0, 0, state.width * DISPLAY_SCALE,
                   state.height * DISPLAY_SCALE);
  }
  drawPromptGlyphs(octx, state.prompts, DISPLAY_SCALE);
  el.undo.disabled = !canUndo(state);
  el.redo.disabled = !canRedo(state);
  el.exportBtn.disabled = !canExport(state);
}

function drawImage(): void {
  if (!imageBitmap) return;
  const dpr = window.devicePixelRatio || 1;
  const ctx = el.canvas.getContext("2d")!;
  ctx.setTransform(dpr, 0, 0, dpr, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(imageBitmap, 0, 0, state.width * DISPLAY_SCALE,
                state.height * DISPLAY_SCALE);
}

/** Pointer position in image pixel space (prompts are sent in this space). */
function toImageCoords(ev: PointerEvent): { row: number; col: number } {
  const rect = el.overlay.getBoundingClientRect();
  const col = ((ev.clientX - rect.left) / rect.width) * state.width;
  const row = ((ev.clientY - rect.top) / rect.height) * state.height;
  return {
    row: Math.min(Math.max(row, 0), state.height - 1),
    col: Math.min(Math.max(col, 0), state.width - 1),
  };
}

function addPrompt(prompt: Prompt): void {
  state = pushPrompt(state, prompt);
  render();
  requestPrediction();
}

async function loadImageFile(file: File): Promise<void> {
  try {
    const bytes = await file.arrayBuffer();
    const res = await api.uploadImage(new Blob([bytes], { type: "image/png" }));
    state = withImage(state, res.image_id, res.height, res.width);
    imageBitmap = await createImageBitmap(new Blob([bytes]));
    setCanvasSize(el.canvas, res.width, res.height);
    setCanvasSize(el.overlay, res.width, res.height);
    drawImage();
    render();
    el.status.textContent = `image ${res.width}x${res.height} - ${res.image_id.slice(0, 12)}`;
  } catch (err) {
    toast(String(err));
  }
}

el.file.addEventListener("change", () => {
  const file = el.file.files?.[0];
  if (file) void loadImageFile(file);
});

for (const button of el.tools) {
  button.addEventListener("click", () => {
    tool = button.dataset.tool as ToolMode;
    el.tools.forEach((b) => b.classList.toggle("active", b === button));
    el.textInput.classList.toggle("visible", tool === "text");
  });
}

el.overlay.addEventListener("pointerdown", (ev) => {
  if (!state.imageId) return;
  const pos = toImageCoords(ev);
  if (tool === "box") {
    dragStart = pos;
  } else if (tool === "fg-point" || tool === "bg-point") {
    addPrompt({ kind: "point", row: pos.row, col: pos.col,
                polarity: tool === "fg-point" ? "fg" : "bg" });
  }
});

el.overlay.addEventListener("pointerup", (ev) => {
  if (!dragStart || tool !== "box") return;
  const end = toImageCoords(ev);
  const r0 = Math.min(dragStart.row, end.row);
  const r1 = Math.max(dragStart.row, end.row);
  const c0 = Math.min(dragStart.col, end.col);
  const c1 = Math.max(dragStart.col, end.col);
  dragStart = null;
  if (r1 - r0 < 1 || c1 - c0 < 1) {
    toast("box too small - drag a larger region");
    return;
  }
  addPrompt({ kind: "box", r0, c0, r1, c1 });
});

el.textAdd.addEventListener("click", () => {
  const text = el.textInput.value.trim();
  if (!state.imageId) return;
  if (!text) {
    toast("type a structure name first");
    return;
  }
  addPrompt({ kind: "text", text });
});

el.undo.addEventListener("click", () => {
  state = undo(state);
  render();
  requestPrediction();
});

el.redo.addEventListener("click", () => {
  state = redo(state);
  render();
  requestPrediction();
});

el.exportBtn.addEventListener("click", () => {
  if (!canExport(state) || !state.imageId || !state.mask) return;
  const payload = buildExport(state.imageId, state.mask, state.iou, state.prompts);
  const blob = new Blob([JSON.stringify(payload, null, 2)],
                        { type: "application/json" });
  const a = document.createElement("a");
  a.href = URL.createObjectURL(blob);
  a.download = `annotation_${state.imageId.slice(0, 12)}.json`;
  a.click();
  URL.revokeObjectURL(a.href);
});

el.importFile.addEventListener("change", async () => {
  const file = el.importFile.files?.[0];
  if (!file) return;
  try {
    const parsed = parseExport(await file.text());
    if (parsed.image_id !== state.imageId) {
      toast("annotation belongs to a different image - load it first");
      return;
    }
    for (const p of parsed.prompts) {
      state = pushPrompt(state, p);
    }
    render();
    requestPrediction();
  } catch (err) {
    toast(String(err));
  }
});

void api.health().then(
  (h) => { el.status.textContent = `model ${h.model_hash.slice(0, 12)} ready`; },
  () => toast("segmentation service unreachable"),
);
