from .model import EFConfig, EFRegressor, embed_frames, predict_ef
from .trajectory import (BeatWindow, area_trajectory, ef_reference, find_ed_es,
                         sample_beat_frames)
from .train import build_beat_dataset, evaluate_ef, train_ef

__all__ = [
    "BeatWindow", "area_trajectory", "find_ed_es", "sample_beat_frames",
    "ef_reference", "EFConfig", "EFRegressor", "predict_ef", "embed_frames",
    "train_ef", "evaluate_ef", "build_beat_dataset",
]
