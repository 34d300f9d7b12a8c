from .adapters import (ADAPTER_HIDDEN, AdaptedBlock, Adapter, AdapterConfig,
                       count_parameters, insert_adapters)
from .vit import (PRESETS, Block, EncoderConfig, EncoderOutput,
                  VisionTransformer, encode, image_to_tensor)

__all__ = [
    "PRESETS", "EncoderConfig", "EncoderOutput", "VisionTransformer", "Block",
    "encode", "image_to_tensor",
    "ADAPTER_HIDDEN", "Adapter", "AdaptedBlock", "AdapterConfig",
    "insert_adapters", "count_parameters",
]
