from .decoder import MaskDecoder, SegmentationModel, TwoWayBlock
from .losses import (corrective_point, dice_score, multi_forward_loss, seg_loss,
                     soft_dice_loss)
from .prompts import (PromptEncoder, PromptSet, box_from_mask,
                      grid_position_encoding, perturb_box,
                      sinusoidal_position_encoding)
from .text import HashTextEmbedder, TextEmbedder
from .train import (DEFAULT_TEXT_PROMPT, SegTrainConfig, build_segmenter,
                    evaluate_dice, few_shot_harness, mask_samples_from_clips,
                    train_segmenter, write_dice_report)

__all__ = [
    "PromptSet", "PromptEncoder", "perturb_box", "box_from_mask",
    "sinusoidal_position_encoding", "grid_position_encoding",
    "MaskDecoder", "SegmentationModel", "TwoWayBlock",
    "dice_score", "soft_dice_loss", "seg_loss", "multi_forward_loss",
    "corrective_point", "HashTextEmbedder", "TextEmbedder",
    "SegTrainConfig", "build_segmenter", "train_segmenter", "evaluate_dice",
    "few_shot_harness", "write_dice_report", "mask_samples_from_clips",
    "DEFAULT_TEXT_PROMPT",
]
