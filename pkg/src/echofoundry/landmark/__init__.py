from .decoder import LandmarkDecoder, LandmarkModel, build_landmark_decoder, tap_blocks
from .heatmaps import (HeatmapConfig, extract_landmark, extract_landmarks,
                       render_heatmaps)
from .losses import FocalConfig, focal_loss, gdl_focal_loss, generalized_dice_loss
from .measure import Measurement, compute_measurements, derive_lvid_endpoints
from .train import (LandmarkTrainConfig, build_landmark_model,
                    landmark_samples_from_clips, measure_frame, measurement_mae,
                    measurement_report, predict_landmarks, train_landmark)

__all__ = [
    "HeatmapConfig", "render_heatmaps", "extract_landmark", "extract_landmarks",
    "FocalConfig", "gdl_focal_loss", "generalized_dice_loss", "focal_loss",
    "Measurement", "compute_measurements", "derive_lvid_endpoints",
    "LandmarkDecoder", "LandmarkModel", "build_landmark_decoder", "tap_blocks",
    "LandmarkTrainConfig", "build_landmark_model", "train_landmark",
    "predict_landmarks", "measure_frame", "measurement_report",
    "measurement_mae", "landmark_samples_from_clips",
]
