from .head import ClassifierHead, class_weights_from_counts, weighted_ce
from .train import (ClassifyConfig, ViewClassifier, build_classifier,
                    evaluate_sequences, load_clips, predict_sequence,
                    train_classifier)
from .voting import SequencePrediction, majority_vote, sample_frames

__all__ = [
    "ClassifierHead", "class_weights_from_counts", "weighted_ce",
    "sample_frames", "majority_vote", "SequencePrediction",
    "ClassifyConfig", "ViewClassifier", "build_classifier", "train_classifier",
    "evaluate_sequences", "predict_sequence", "load_clips",
]
