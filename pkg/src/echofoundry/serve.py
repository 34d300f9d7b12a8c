"""HTTP inference service for interactive segmentation.

Endpoints (JSON over HTTP/1.1, no auth; meant as a local tool):
  POST /v1/images   raw PNG body -> {image_id, height, width}
  POST /v1/predict  {image_id, prompts} -> {mask_rle, iou_score, latency_ms}
  GET  /v1/health   -> {status, model_hash}

Uploaded images are preprocessed through the standard crop/pad/resize path
and embedded once; prompts and returned masks live in the uploaded image's
pixel space. Weights are immutable after load; the embedding cache is an
LRU with atomic get-or-insert.
"""

from __future__ import annotations

import io
import threading
import time
from collections import OrderedDict
from dataclasses import dataclass
from hashlib import sha256
from pathlib import Path
from typing import Optional

import numpy as np
import torch
from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from PIL import Image, UnidentifiedImageError

from . import checkpointio
from .data.preprocess import FOREGROUND_EPS, bilinear_resize
from .data.rle import encode_rle
from .data.types import BACKGROUND, EchoImage
from .encoder.vit import EncoderConfig, VisionTransformer
from .errors import ArgumentError, EchoFoundryError, GeometryError
from .segment.prompts import PromptSet
from .segment.train import SegTrainConfig, build_segmenter

MIN_SIDE = 8


@dataclass
class _Session:
    image_id: str
    original_hw: tuple[int, int]
    # original -> model-space transform: crop origin, pad offset, scale, side
    r0: int
    c0: int
    pad_top: int
    pad_left: int
    crop_hw: tuple[int, int]
    side: int
    scale: float
    patch_tokens: torch.Tensor
    model_hw: tuple[int, int]


class LruCache:
    def __init__(self, capacity: int):
        self.capacity = max(1, capacity)
        self._data: OrderedDict[str, _Session] = OrderedDict()
        self._lock = threading.Lock()

    def get(self, key: str) -> Optional[_Session]:
        with self._lock:
            if key not in self._data:
                return None
            self._data.move_to_end(key)
            return self._data[key]

    def get_or_insert(self, key: str, factory) -> _Session:
        with self._lock:
            if key in self._data:
                self._data.move_to_end(key)
                return self._data[key]
        value = factory()
        with self._lock:
            if key not in self._data:
                self._data[key] = value
                while len(self._data) > self.capacity:
                    self._data.popitem(last=False)
            self._data.move_to_end(key)
            return self._data[key]


def _decode_png(raw: bytes) -> np.ndarray:
    try:
        img = Image.open(io.BytesIO(raw))
        img.load()
    except (UnidentifiedImageError, OSError) as exc:
        raise ArgumentError(f"undecodable image: {exc}") from exc
    if img.mode not in ("L", "RGB", "RGBA", "LA", "I", "P"):
        raise ArgumentError(f"unsupported PNG mode {img.mode}")
    arr = np.asarray(img.convert("L"), dtype=np.float32)
    return arr / 127.5 - 1.0


def create_app(checkpoint: Path, cache_size: int = 32,
               max_bytes: int = 8 * 1024 * 1024,
               static_dir: Optional[Path] = None) -> FastAPI:
    params, meta = checkpointio.load(checkpoint)
    if meta.get("task") != "segment":
        raise ArgumentError(f"serve needs a segment checkpoint, got {meta.get('task')!r}")
    encoder_cfg = EncoderConfig(**meta["encoder_cfg"])
    seg_cfg = SegTrainConfig(encoder_mode=meta.get("encoder_mode", "finetune"),
                             adapter_hidden=meta.get("adapter_hidden", 16))
    model = build_segmenter(encoder_cfg, seg_cfg)
    checkpointio.load_into_module(model, params)
    model.eval()
    model_hash = meta["content_hash"]
    cache = LruCache(cache_size)
    input_size = encoder_cfg.input_size

    app = FastAPI(title="echofoundry segmentation service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])
    app.state.model = model
    app.state.cache = cache

    def build_session(raw: bytes, image_id: str) -> _Session:
        pixels = _decode_png(raw)
        h, w = pixels.shape
        if h < MIN_SIDE or w < MIN_SIDE:
            raise ArgumentError(
                f"below minimum size: {h}x{w} (need >= {MIN_SIDE} per side)")
        fg = pixels > BACKGROUND + FOREGROUND_EPS
        if fg.any():
            rows = np.flatnonzero(fg.any(axis=1))
            cols = np.flatnonzero(fg.any(axis=0))
            r0, r1 = int(rows[0]), int(rows[-1]) + 1
            c0, c1 = int(cols[0]), int(cols[-1]) + 1
        else:
            r0, c0, r1, c1 = 0, 0, h, w
        crop = pixels[r0:r1, c0:c1]
        ch, cw = crop.shape
        side = max(ch, cw)
        pad_top = (side - ch) // 2
        pad_left = (side - cw) // 2
        padded = np.full((side, side), BACKGROUND, dtype=np.float32)
        padded[pad_top : pad_top + ch, pad_left : pad_left + cw] = crop
        resized = bilinear_resize(padded, input_size, input_size)
        image = EchoImage(np.ascontiguousarray(resized, dtype=np.float32))
        tokens = model.embed_image(image)
        return _Session(image_id=image_id, original_hw=(h, w), r0=r0, c0=c0,
                        pad_top=pad_top, pad_left=pad_left, crop_hw=(ch, cw),
                        side=side, scale=input_size / side, patch_tokens=tokens,
                        model_hw=(input_size, input_size))

    def to_model_space(session: _Session, r: float, c: float) -> tuple[float, float]:
        mr = (r - session.r0 + session.pad_top) * session.scale
        mc = (c - session.c0 + session.pad_left) * session.scale
        hi = session.model_hw[0] - 1
        return (min(max(mr, 0.0), hi), min(max(mc, 0.0), hi))

    def transform_prompts(session: _Session, prompts: PromptSet) -> PromptSet:
        points = [(to_model_space(session, r, c), pol) for (r, c), pol in prompts.points]
        boxes = []
        for r0, c0, r1, c1 in prompts.boxes:
            a = to_model_space(session, r0, c0)
            b = to_model_space(session, r1, c1)
            boxes.append((min(a[0], b[0]), min(a[1], b[1]),
                          max(a[0], b[0]), max(a[1], b[1])))
        prev = prompts.prev_mask
        if prev is not None:
            if prev.shape != session.original_hw:
                raise ArgumentError("prev_mask dims must match the uploaded image")
            prev = _mask_to_model(session, prev)
        return PromptSet(points=points, boxes=boxes, text=prompts.text, prev_mask=prev)

    def _mask_to_model(session: _Session, mask: np.ndarray) -> np.ndarray:
        r0, c0 = session.r0, session.c0
        ch, cw = session.crop_hw
        padded = np.zeros((session.side, session.side), dtype=np.float32)
        padded[session.pad_top : session.pad_top + ch,
               session.pad_left : session.pad_left + cw] = mask[r0 : r0 + ch, c0 : c0 + cw]
        return bilinear_resize(padded, input_size, input_size)

    def mask_to_original(session: _Session, probs: np.ndarray) -> np.ndarray:
        padded = bilinear_resize(probs, session.side, session.side)
        ch, cw = session.crop_hw
        crop = padded[session.pad_top : session.pad_top + ch,
                      session.pad_left : session.pad_left + cw]
        out = np.zeros(session.original_hw, dtype=np.float32)
        out[session.r0 : session.r0 + ch, session.c0 : session.c0 + cw] = crop
        return out

    @app.get("/v1/health")
    def health() -> dict:
        return {"status": "ok", "model_hash": model_hash}

    @app.post("/v1/images")
    async def upload_image(request: Request) -> Response:
        raw = await request.body()
        if len(raw) > max_bytes:
            return JSONResponse({"error": f"payload exceeds {max_bytes} bytes"},
                                status_code=413)
        image_id = sha256(raw).hexdigest()
        try:
            session = cache.get_or_insert(image_id, lambda: build_session(raw, image_id))
        except ArgumentError as exc:
            return JSONResponse({"error": str(exc)}, status_code=400)
        h, w = session.original_hw
        return JSONResponse({"image_id": image_id, "height": h, "width": w})

    @app.post("/v1/predict")
    async def predict(request: Request) -> Response:
        started = time.perf_counter()
        try:
            payload = await request.json()
        except Exception:
            return JSONResponse({"error": "body must be JSON"}, status_code=422)
        image_id = payload.get("image_id")
        session = cache.get(image_id) if isinstance(image_id, str) else None
        if session is None:
            return JSONResponse({"error": f"unknown image_id {image_id!r}"},
                                status_code=404)
        try:
            prompts = PromptSet.from_json(payload.get("prompts") or {})
            if prompts.is_empty():
                raise ArgumentError("prompt set is empty")
            prompts.validate(session.original_hw)  # client speaks original pixels
            model_prompts = transform_prompts(session, prompts)
            model_prompts.validate(session.model_hw)
        except (ArgumentError, GeometryError, KeyError, TypeError, ValueError) as exc:
            return JSONResponse({"error": f"malformed prompts: {exc}"}, status_code=422)
        probs, iou = model.decode(session.patch_tokens, model_prompts, session.model_hw)
        mask = mask_to_original(session, probs) >= 0.5
        latency_ms = (time.perf_counter() - started) * 1000.0
        return JSONResponse({"mask_rle": encode_rle(mask), "iou_score": iou,
                             "latency_ms": latency_ms})

    @app.exception_handler(EchoFoundryError)
    async def domain_error(_request, exc: EchoFoundryError):
        return JSONResponse({"error": str(exc)}, status_code=422)

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")
    return app
