"""Wall-thickness and internal-dimension measurements from landmarks.

Landmark ids: IVS_top, IVS_bottom (LV side), LVPW_top (LV side), LVPW_bottom.
The internal-dimension endpoints are not annotated directly; they are the
septum's LV-side landmark and the posterior wall's LV-side landmark.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import ArgumentError


@dataclass
class Measurement:
    ivs_mm: Optional[float]
    lvid_mm: Optional[float]
    lvpw_mm: Optional[float]
    calibration: float

    def as_dict(self) -> dict:
        return {"ivs_mm": self.ivs_mm, "lvid_mm": self.lvid_mm,
                "lvpw_mm": self.lvpw_mm}


def _distance(p1, p2) -> float:
    return float(np.hypot(p1[0] - p2[0], p1[1] - p2[1]))


def derive_lvid_endpoints(landmarks: dict) -> Optional[tuple]:
    """LVID spans from the septum's LV-side point to the posterior wall's."""
    p1 = landmarks.get("IVS_bottom")
    p2 = landmarks.get("LVPW_top")
    if p1 is None or p2 is None:
        return None
    return (p1, p2)


def compute_measurements(landmarks: dict, calibration: float) -> Measurement:
    """Euclidean pixel distances scaled to millimeters; absent pairs stay absent."""
    if calibration is None or calibration <= 0:
        raise ArgumentError(f"calibration must be positive, got {calibration}")

    def pair(a: str, b: str) -> Optional[float]:
        if landmarks.get(a) is None or landmarks.get(b) is None:
            return None
        return _distance(landmarks[a], landmarks[b]) * calibration

    lvid = derive_lvid_endpoints(landmarks)
    return Measurement(
        ivs_mm=pair("IVS_top", "IVS_bottom"),
        lvid_mm=_distance(*lvid) * calibration if lvid else None,
        lvpw_mm=pair("LVPW_top", "LVPW_bottom"),
        calibration=calibration,
    )
