"""Synthetic echo-like study generator.

Renders class-distinctive chamber layouts inside an imaging cone with speckle
noise, and emits everything the four task pipelines need as ground truth:
per-frame LV masks and wall landmarks, a periodic LV-area trajectory, and a
reference EF label. Same (seed, view, n_frames) always produces bit-identical
output.
"""

from __future__ import annotations

import numpy as np

from ..errors import ArgumentError
from .preprocess import cone_interior_mask
from .types import BACKGROUND, ConeGeometry, EchoClip, EchoImage

VIEW_CLASSES = (
    "A2C", "A3C", "A4C", "A5C",
    "Cont:A2C", "Cont:A3C", "Cont:A4C", "Cont:SAX",
    "PLAX:ID", "PLAX:LV", "PLAX:RVN", "PLAX:RVT", "PLAX:VAL",
    "PSAX:AV", "PSAX:MV", "PSAX:PAP",
    "SC:4C", "SC:IVC",
)
VIEW_TO_ID = {name: i for i, name in enumerate(VIEW_CLASSES)}

LANDMARK_IDS = ("IVS_top", "IVS_bottom", "LVPW_top", "LVPW_bottom")

CHAMBER = -0.55  # blood pool
CONTRAST = 0.8  # opacified blood pool
WALL = 0.6  # myocardium bands / rings

# Per-view geometry in relative image units. The first ellipse is the LV and
# pulsates over the cardiac cycle; "bands" adds IVS/LVPW walls plus landmarks.
_LAYOUTS: dict[str, dict] = {
    "A2C": {"ellipses": [(0.46, 0.50, 0.16, 0.11), (0.74, 0.50, 0.09, 0.09)]},
    "A3C": {"ellipses": [(0.45, 0.44, 0.16, 0.10), (0.72, 0.40, 0.08, 0.08),
                          (0.68, 0.62, 0.08, 0.07)]},
    "A4C": {"ellipses": [(0.45, 0.38, 0.17, 0.11), (0.45, 0.64, 0.13, 0.09),
                          (0.74, 0.38, 0.08, 0.08), (0.73, 0.64, 0.08, 0.07)]},
    "A5C": {"ellipses": [(0.45, 0.38, 0.17, 0.11), (0.45, 0.64, 0.13, 0.09),
                          (0.74, 0.38, 0.08, 0.08), (0.73, 0.64, 0.08, 0.07),
                          (0.58, 0.51, 0.05, 0.05)]},
    "PLAX:ID": {"ellipses": [(0.55, 0.50, 0.10, 0.19)], "bands": True},
    "PLAX:LV": {"ellipses": [(0.47, 0.50, 0.13, 0.21)], "bands": True},
    "PLAX:RVN": {"ellipses": [(0.56, 0.46, 0.12, 0.17), (0.33, 0.64, 0.07, 0.07)]},
    "PLAX:RVT": {"ellipses": [(0.51, 0.56, 0.11, 0.16), (0.32, 0.33, 0.07, 0.06)]},
    "PLAX:VAL": {"ellipses": [(0.50, 0.44, 0.08, 0.12), (0.52, 0.70, 0.06, 0.06)]},
    "PSAX:AV": {"ellipses": [(0.52, 0.50, 0.10, 0.10)], "ring": 0.16,
                 "dots": [(0.46, 0.50), (0.56, 0.44), (0.56, 0.56)]},
    "PSAX:MV": {"ellipses": [(0.52, 0.50, 0.13, 0.13)], "ring": 0.19,
                 "slit": (0.52, 0.50, 0.03, 0.10)},
    "PSAX:PAP": {"ellipses": [(0.52, 0.50, 0.15, 0.15)], "ring": 0.21,
                  "dots": [(0.62, 0.42), (0.62, 0.58)]},
    "SC:4C": {"ellipses": [(0.58, 0.34, 0.13, 0.09), (0.44, 0.52, 0.11, 0.08),
                            (0.70, 0.55, 0.08, 0.07), (0.55, 0.70, 0.07, 0.06)]},
    "SC:IVC": {"ellipses": [(0.62, 0.50, 0.05, 0.27)]},
}
_LAYOUTS["Cont:A2C"] = {**_LAYOUTS["A2C"], "contrast": True}
_LAYOUTS["Cont:A3C"] = {**_LAYOUTS["A3C"], "contrast": True}
_LAYOUTS["Cont:A4C"] = {**_LAYOUTS["A4C"], "contrast": True}
_LAYOUTS["Cont:SAX"] = {**_LAYOUTS["PSAX:PAP"], "contrast": True}


def _resolve_view(view_class) -> tuple[int, str]:
    if isinstance(view_class, str):
        if view_class not in VIEW_TO_ID:
            raise ArgumentError(f"unknown view class {view_class!r}")
        return VIEW_TO_ID[view_class], view_class
    vid = int(view_class)
    if not 0 <= vid < len(VIEW_CLASSES):
        raise ArgumentError(f"view id {vid} outside [0, {len(VIEW_CLASSES)})")
    return vid, VIEW_CLASSES[vid]


def _ellipse_mask(size: int, cy: float, cx: float, ry: float, rx: float) -> np.ndarray:
    rr, cc = np.meshgrid(np.arange(size, dtype=np.float64),
                         np.arange(size, dtype=np.float64), indexing="ij")
    return ((rr - cy) / max(ry, 1e-9)) ** 2 + ((cc - cx) / max(rx, 1e-9)) ** 2 <= 1.0


def _smooth(field: np.ndarray, passes: int = 2) -> np.ndarray:
    for _ in range(passes):
        acc = field.copy()
        acc[1:] += field[:-1]
        acc[:-1] += field[1:]
        acc[:, 1:] += field[:, :-1]
        acc[:, :-1] += field[:, 1:]
        field = acc / 5.0
    return field


def generate_synthetic_study(seed: int, view_class, n_frames: int,
                             size: int = 64) -> EchoClip:
    """Render one deterministic clip with full ground truth."""
    if n_frames < 1:
        raise ArgumentError(f"n_frames must be >= 1, got {n_frames}")
    vid, view = _resolve_view(view_class)
    layout = _LAYOUTS[view]
    rng = np.random.default_rng([int(seed), vid])

    cone = ConeGeometry(
        apex=(1.0, size / 2 + rng.uniform(-1.5, 1.5)),
        half_angle=float(rng.uniform(0.62, 0.80)),
        radius=float(0.97 * size),
    )
    inside = cone_interior_mask(cone, size, size)
    calibration = float(rng.uniform(0.35, 0.75))
    frame_rate = float(rng.uniform(20.0, 40.0))

    # Cardiac cycle: the LV axes scale by k_t, starting at end-diastole.
    amp = float(rng.uniform(0.12, 0.60))
    beats = float(rng.uniform(1.2, 2.2))
    phase = 2 * np.pi * beats * np.arange(n_frames) / max(n_frames, 1)
    k_t = 1.0 - amp * (0.5 - 0.5 * np.cos(phase))

    jitter = rng.uniform(0.96, 1.04, size=4)
    tissue = 0.05 + 0.18 * _smooth(rng.standard_normal((size, size)))

    chamber_value = CONTRAST if layout.get("contrast") else CHAMBER
    ellipses = [(cy * size * jitter[0], cx * size * jitter[1],
                 ry * size * jitter[2], rx * size * jitter[3])
                for cy, cx, ry, rx in layout["ellipses"]]
    lv_cy, lv_cx, lv_ry, lv_rx = ellipses[0]
    band_th = size * rng.uniform(0.055, 0.075)

    frames: list[EchoImage] = []
    annotations: list[dict] = []
    areas: list[float] = []
    for t in range(n_frames):
        k = float(k_t[t])
        field = tissue.copy()
        ry_t, rx_t = lv_ry * k, lv_rx * k

        if layout.get("ring"):
            ring_r = layout["ring"] * size * jitter[2] * (1 + 0.3 * (k - 1))
            outer = _ellipse_mask(size, lv_cy, lv_cx, ring_r + band_th, ring_r + band_th)
            field[outer] = WALL
        if layout.get("bands"):
            top = lv_cy - ry_t
            bottom = lv_cy + ry_t
            ivs = _ellipse_mask(size, top - band_th / 2, lv_cx, band_th / 2, rx_t * 1.25)
            pw = _ellipse_mask(size, bottom + band_th / 2, lv_cx, band_th / 2, rx_t * 1.25)
            field[ivs] = WALL
            field[pw] = WALL

        lv_mask = _ellipse_mask(size, lv_cy, lv_cx, ry_t, rx_t)
        field[lv_mask] = chamber_value
        for cy, cx, ry, rx in ellipses[1:]:
            field[_ellipse_mask(size, cy, cx, ry, rx)] = chamber_value
        if layout.get("slit"):
            cy, cx, ry, rx = layout["slit"]
            field[_ellipse_mask(size, cy * size, cx * size, ry * size, rx * size)] = WALL
        for dot in layout.get("dots", ()):  # papillary muscles / leaflets
            field[_ellipse_mask(size, dot[0] * size, dot[1] * size,
                                0.025 * size, 0.025 * size)] = WALL

        field += 0.10 * rng.standard_normal((size, size))
        field = np.clip(field, -1.0, 1.0)
        pixels = np.where(inside, field, BACKGROUND).astype(np.float32)
        frames.append(EchoImage(pixels=pixels, calibration=calibration, cone=cone))

        lv_mask &= inside
        areas.append(float(np.pi * ry_t * rx_t))
        ann: dict = {"lv_area_px": int(lv_mask.sum()), "mask": lv_mask}
        if layout.get("bands"):
            top = lv_cy - ry_t
            bottom = lv_cy + ry_t
            ann["landmarks"] = {
                "IVS_top": (top - band_th, lv_cx),
                "IVS_bottom": (top, lv_cx),
                "LVPW_top": (bottom, lv_cx),
                "LVPW_bottom": (bottom + band_th, lv_cx),
            }
        annotations.append(ann)

    edv, esv = max(areas), min(areas)
    ef = 100.0 * (edv - esv) / edv if n_frames > 1 else 0.0
    return EchoClip(frames=frames, frame_rate=frame_rate, label=vid,
                    annotations=annotations, ef_percent=float(ef),
                    area_trajectory=areas)
