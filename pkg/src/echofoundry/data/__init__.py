from .preprocess import bilinear_resize, crop_pad_resize, mask_cone, slice_volume
from .rle import decode_rle, encode_rle
from .studyio import (check_split_disjointness, generate_dataset, load_clip,
                      manifest_split, read_manifest, save_clip, write_manifest)
from .synth import LANDMARK_IDS, VIEW_CLASSES, VIEW_TO_ID, generate_synthetic_study
from .types import BACKGROUND, ConeGeometry, EchoClip, EchoImage, Volume

__all__ = [
    "BACKGROUND", "ConeGeometry", "EchoClip", "EchoImage", "Volume",
    "VIEW_CLASSES", "VIEW_TO_ID", "LANDMARK_IDS",
    "bilinear_resize", "crop_pad_resize", "mask_cone", "slice_volume",
    "encode_rle", "decode_rle", "generate_synthetic_study",
    "save_clip", "load_clip", "write_manifest", "read_manifest",
    "manifest_split", "check_split_disjointness", "generate_dataset",
]
