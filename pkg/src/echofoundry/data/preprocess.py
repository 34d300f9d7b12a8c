"""Frame preprocessing: cone masking, tight crop / pad / resize, volume slicing.

Conventions: pixel (r, c) sits at coordinates (r, c); the cone opens downward
from its apex. Background is -1, and anything strictly above -1 + 1e-6 counts
as foreground for cropping purposes.
"""

from __future__ import annotations

import numpy as np

from ..errors import ArgumentError
from .types import BACKGROUND, ConeGeometry, EchoImage, Volume

FOREGROUND_EPS = 1e-6

AB_PLANE_ANGLES_DEG = tuple(range(0, 180, 15))  # 12 slices
C_PLANE_DEPTHS = (0.25, 0.50, 0.75)  # fractions of the long axis


def bilinear_resize(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Plain bilinear resample (half-pixel centers, clamped edges, no AA).

    Returns the input array unchanged (same object) when dims already match,
    which keeps repeated preprocessing bit-exact.
    """
    if out_h < 1 or out_w < 1:
        raise ArgumentError("resize target must be positive")
    h, w = arr.shape
    if (h, w) == (out_h, out_w):
        return arr
    rows = (np.arange(out_h, dtype=np.float64) + 0.5) * (h / out_h) - 0.5
    cols = (np.arange(out_w, dtype=np.float64) + 0.5) * (w / out_w) - 0.5
    rows = np.clip(rows, 0, h - 1)
    cols = np.clip(cols, 0, w - 1)
    r0 = np.floor(rows).astype(np.int64)
    c0 = np.floor(cols).astype(np.int64)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    fr = (rows - r0)[:, None]
    fc = (cols - c0)[None, :]
    a = arr[np.ix_(r0, c0)]
    b = arr[np.ix_(r0, c1)]
    c = arr[np.ix_(r1, c0)]
    d = arr[np.ix_(r1, c1)]
    out = a * (1 - fr) * (1 - fc) + b * (1 - fr) * fc + c * fr * (1 - fc) + d * fr * fc
    return out.astype(arr.dtype, copy=False)


def bilinear_sample(arr: np.ndarray, rows: np.ndarray, cols: np.ndarray,
                    fill: float = BACKGROUND) -> np.ndarray:
    """Sample ``arr`` at fractional (row, col) points; out-of-bounds -> fill."""
    h, w = arr.shape
    rows = np.asarray(rows, dtype=np.float64)
    cols = np.asarray(cols, dtype=np.float64)
    inside = (rows >= 0) & (rows <= h - 1) & (cols >= 0) & (cols <= w - 1)
    rc = np.clip(rows, 0, h - 1)
    cc = np.clip(cols, 0, w - 1)
    r0 = np.floor(rc).astype(np.int64)
    c0 = np.floor(cc).astype(np.int64)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    fr = rc - r0
    fc = cc - c0
    out = (arr[r0, c0] * (1 - fr) * (1 - fc) + arr[r0, c1] * (1 - fr) * fc
           + arr[r1, c0] * fr * (1 - fc) + arr[r1, c1] * fr * fc)
    return np.where(inside, out, fill)


def cone_interior_mask(cone: ConeGeometry, height: int, width: int) -> np.ndarray:
    """Boolean [H, W] grid of pixels inside the downward-opening sector."""
    rr, cc = np.meshgrid(np.arange(height, dtype=np.float64),
                         np.arange(width, dtype=np.float64), indexing="ij")
    dr = rr - cone.apex[0]
    dc = cc - cone.apex[1]
    dist = np.hypot(dr, dc)
    # Angle from the downward axis; apex itself (dist 0) counts as inside.
    with np.errstate(invalid="ignore", divide="ignore"):
        cos_angle = np.where(dist > 0, dr / np.maximum(dist, 1e-12), 1.0)
    return (dist <= cone.radius) & (cos_angle >= np.cos(cone.half_angle))


def mask_cone(image: EchoImage, cone: ConeGeometry) -> EchoImage:
    """Set everything outside the imaging sector to background (-1)."""
    cone.validate(image.height, image.width)
    inside = cone_interior_mask(cone, image.height, image.width)
    pixels = np.where(inside, image.pixels, np.float32(BACKGROUND)).astype(np.float32)
    return EchoImage(pixels=pixels, calibration=image.calibration, cone=cone)


def crop_pad_resize(image: EchoImage, target: int) -> EchoImage:
    """Tight-crop foreground, pad symmetric to square, resize to target.

    Calibration is rescaled by (padded side / target). The cone geometry is
    remapped through the same crop/pad/scale transform when present.
    """
    if target < 1:
        raise ArgumentError(f"target size must be >= 1, got {target}")
    px = image.pixels
    fg = px > BACKGROUND + FOREGROUND_EPS
    if fg.any():
        rows = np.flatnonzero(fg.any(axis=1))
        cols = np.flatnonzero(fg.any(axis=0))
        r0, r1 = int(rows[0]), int(rows[-1]) + 1
        c0, c1 = int(cols[0]), int(cols[-1]) + 1
    else:
        r0, c0, r1, c1 = 0, 0, px.shape[0], px.shape[1]
    crop = px[r0:r1, c0:c1]
    h, w = crop.shape
    side = max(h, w)
    pad_top = (side - h) // 2
    pad_left = (side - w) // 2
    if side != h or side != w:
        padded = np.full((side, side), BACKGROUND, dtype=np.float32)
        padded[pad_top : pad_top + h, pad_left : pad_left + w] = crop
    else:
        padded = crop
    out = bilinear_resize(padded, target, target)
    scale = target / side
    calibration = image.calibration / scale if image.calibration is not None else None
    cone = None
    if image.cone is not None:
        apex_r = (image.cone.apex[0] - r0 + pad_top) * scale
        apex_c = (image.cone.apex[1] - c0 + pad_left) * scale
        cone = ConeGeometry(apex=(apex_r, apex_c), half_angle=image.cone.half_angle,
                            radius=image.cone.radius * scale)
    return EchoImage(pixels=np.ascontiguousarray(out, dtype=np.float32),
                     calibration=calibration, cone=cone)


def slice_volume(volume: Volume, mode: str, target: int = 112) -> list[EchoImage]:
    """Extract planar views from a volume and preprocess each to target size.

    AB mode: 12 planes through the long (first) axis at 15-degree steps,
    sampled over the inscribed in-plane disc so every sample stays in bounds.
    C mode: 3 transverse planes at 25/50/75 percent depth.
    """
    vox = volume.voxels
    nz, ny, nx = vox.shape
    if mode == "AB":
        cy, cx = (ny - 1) / 2.0, (nx - 1) / 2.0
        half = (min(ny, nx) - 1) / 2.0
        ncols = min(ny, nx)
        t = np.linspace(-half, half, ncols)
        slices = []
        for deg in AB_PLANE_ANGLES_DEG:
            theta = np.deg2rad(deg)
            rows = cy + t * np.cos(theta)
            cols = cx + t * np.sin(theta)
            plane = np.empty((nz, ncols), dtype=np.float32)
            for z in range(nz):
                plane[z] = bilinear_sample(vox[z], rows, cols)
            slices.append(EchoImage(pixels=plane))
    elif mode == "C":
        slices = []
        for frac in C_PLANE_DEPTHS:
            zf = frac * (nz - 1)
            z0 = int(np.floor(zf))
            z1 = min(z0 + 1, nz - 1)
            fz = zf - z0
            plane = (1 - fz) * vox[z0] + fz * vox[z1]
            slices.append(EchoImage(pixels=plane.astype(np.float32)))
    else:
        raise ArgumentError(f"unknown slice mode {mode!r}; expected 'AB' or 'C'")
    return [crop_pad_resize(s, target) for s in slices]
