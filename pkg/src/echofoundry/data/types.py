"""Core image/volume containers used throughout the pipelines."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import ArgumentError, GeometryError

BACKGROUND = -1.0  # lower bound of the [-1, 1] intensity range


@dataclass
class ConeGeometry:
    """Ultrasound imaging sector: apex point, half opening angle, depth."""

    apex: tuple[float, float]  # (row, col); may sit above the image (row < 0)
    half_angle: float  # radians, in (0, pi/2)
    radius: float  # pixels, > 0

    def validate(self, height: int, width: int) -> None:
        r, c = self.apex
        if not (0.0 < self.half_angle < np.pi / 2):
            raise GeometryError(f"half_angle {self.half_angle} outside (0, pi/2)")
        if self.radius <= 0:
            raise GeometryError("cone radius must be positive")
        diag = float(np.hypot(height, width))
        if self.radius > diag:
            raise GeometryError(f"cone radius {self.radius} exceeds image diagonal {diag:.1f}")
        if r > height or c < 0 or c > width:
            raise GeometryError(f"cone apex {self.apex} outside/below image bounds {height}x{width}")

    def to_json(self) -> dict:
        return {"apex": [float(self.apex[0]), float(self.apex[1])],
                "half_angle": float(self.half_angle), "radius": float(self.radius)}

    @classmethod
    def from_json(cls, obj: dict) -> "ConeGeometry":
        return cls(apex=(obj["apex"][0], obj["apex"][1]),
                   half_angle=obj["half_angle"], radius=obj["radius"])


@dataclass
class EchoImage:
    """A single preprocessed grayscale frame with calibration metadata.

    ``pixels`` is a float32 [H, W] array valued in [-1, 1]; -1 doubles as the
    background sentinel outside the imaging cone.
    """

    pixels: np.ndarray
    calibration: Optional[float] = None  # mm per pixel
    cone: Optional[ConeGeometry] = None

    def __post_init__(self) -> None:
        self.pixels = np.asarray(self.pixels, dtype=np.float32)
        if self.pixels.ndim != 2:
            raise ArgumentError(f"pixels must be 2-D, got shape {self.pixels.shape}")
        if self.calibration is not None and self.calibration <= 0:
            raise ArgumentError(f"calibration must be positive, got {self.calibration}")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass
class EchoClip:
    """An ordered frame sequence sharing geometry and calibration."""

    frames: list[EchoImage]
    frame_rate: float = 30.0
    label: Optional[int] = None  # view-class id
    clip_id: str = ""
    patient_id: str = ""
    annotations: list[dict] = field(default_factory=list)  # per-frame records
    ef_percent: Optional[float] = None
    area_trajectory: Optional[list[float]] = None

    def __post_init__(self) -> None:
        if len(self.frames) < 1:
            raise ArgumentError("clip needs at least one frame")
        if self.frame_rate <= 0:
            raise ArgumentError("frame_rate must be positive")
        first = self.frames[0]
        for f in self.frames[1:]:
            if f.pixels.shape != first.pixels.shape or f.calibration != first.calibration:
                raise ArgumentError("all frames must share dims and calibration")

    def __len__(self) -> int:
        return len(self.frames)


@dataclass
class Volume:
    """A 3-D voxel grid; axis 0 is the long axis used for plane extraction."""

    voxels: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self) -> None:
        self.voxels = np.asarray(self.voxels, dtype=np.float32)
        if self.voxels.ndim != 3:
            raise GeometryError(f"volume must be 3-D, got shape {self.voxels.shape}")
        if min(self.voxels.shape) < 2:
            raise GeometryError(f"all volume dims must be >= 2, got {self.voxels.shape}")
        if any(s <= 0 for s in self.spacing):
            raise GeometryError("voxel spacing must be positive")
