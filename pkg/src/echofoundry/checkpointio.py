"""Single-file weight container.

Layout: 8-byte little-endian header length, a UTF-8 JSON header
``{"meta": {...}, "tensors": {name: {shape, dtype, byte_offset}}}``, then the
raw little-endian float32 tensor bytes back to back. The meta block carries a
sha256 of the blob; loads verify it and fail without partial state.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .errors import ArgumentError, CorruptionError

_LEN_FMT = "<Q"


def _as_float32(name: str, value) -> np.ndarray:
    arr = np.asarray(value.detach().cpu().numpy() if hasattr(value, "detach") else value)
    if arr.dtype != np.float32:
        if not np.issubdtype(arr.dtype, np.floating) and not np.issubdtype(arr.dtype, np.integer):
            raise ArgumentError(f"tensor {name!r} has unsupported dtype {arr.dtype}")
        arr = arr.astype(np.float32)
    return np.ascontiguousarray(arr)


def save(params: dict, path: Path, meta: Optional[dict] = None) -> str:
    """Write tensors + meta atomically; returns the blob content hash."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tensors = {}
    chunks = []
    offset = 0
    for name in sorted(params):
        arr = _as_float32(name, params[name])
        raw = arr.tobytes(order="C")
        tensors[name] = {"shape": list(arr.shape), "dtype": "float32", "byte_offset": offset}
        chunks.append(raw)
        offset += len(raw)
    blob = b"".join(chunks)
    content_hash = hashlib.sha256(blob).hexdigest()
    header = {"meta": {**(meta or {}), "content_hash": content_hash}, "tensors": tensors}
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(struct.pack(_LEN_FMT, len(header_bytes)))
            fh.write(header_bytes)
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return content_hash


def _read(path: Path) -> tuple[dict, bytes]:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise CorruptionError(f"cannot read checkpoint {path}: {exc}") from exc
    if len(raw) < 8:
        raise CorruptionError(f"checkpoint {path} truncated (no header length)")
    (hlen,) = struct.unpack(_LEN_FMT, raw[:8])
    if len(raw) < 8 + hlen:
        raise CorruptionError(f"checkpoint {path} truncated (header incomplete)")
    try:
        header = json.loads(raw[8 : 8 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptionError(f"checkpoint {path} has a malformed header") from exc
    blob = raw[8 + hlen :]
    expected = header.get("meta", {}).get("content_hash")
    if expected is None or hashlib.sha256(blob).hexdigest() != expected:
        raise CorruptionError(f"checkpoint {path} failed its content hash check")
    return header, blob


def read_meta(path: Path) -> dict:
    header, _ = _read(path)
    return header["meta"]


def load(path: Path) -> tuple[dict[str, np.ndarray], dict]:
    """Load every tensor; returns (params, meta). Bit-exact vs what was saved."""
    header, blob = _read(path)
    params = {}
    for name, spec in header["tensors"].items():
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        off = spec["byte_offset"]
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=off).reshape(shape)
        params[name] = arr.copy()
    return params, header["meta"]


def partial_load(path: Path, name_filter: str) -> tuple[dict[str, np.ndarray], dict]:
    """Load only tensors whose name matches the regex ``name_filter``."""
    import re

    pattern = re.compile(name_filter)
    params, meta = load(path)
    return {k: v for k, v in params.items() if pattern.match(k)}, meta


def state_dict_arrays(module) -> dict[str, np.ndarray]:
    """Snapshot a torch module's state dict as float32 numpy arrays."""
    return {k: _as_float32(k, v) for k, v in module.state_dict().items()}


def load_into_module(module, params: dict[str, np.ndarray],
                     strict: bool = True) -> None:
    """Copy checkpoint arrays into a torch module's tensors."""
    import torch

    state = module.state_dict()
    unknown = [k for k in params if k not in state]
    if unknown and strict:
        raise KeyError(f"checkpoint tensors not in module: {unknown[:5]}")
    missing = [k for k in state if k not in params]
    if missing and strict:
        raise KeyError(f"module tensors missing from checkpoint: {missing[:5]}")
    with torch.no_grad():
        for k, v in params.items():
            if k in state:
                state[k].copy_(torch.from_numpy(np.array(v)))


def filter_names(params: dict, prefixes: Iterable[str]) -> dict:
    return {k: v for k, v in params.items() if any(k.startswith(p) for p in prefixes)}
