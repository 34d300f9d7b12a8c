from .crops import CropBatch, multi_crop, random_resized_crop, sample_token_mask
from .head import ProjectionHead
from .losses import dino_cls_loss, ema_update, ibot_loss, koleo_loss, sinkhorn_knopp
from .trainer import (DistillationModel, PretrainConfig, PretrainSession,
                      run_pretraining, tiny_pretrain_config)

__all__ = [
    "CropBatch", "multi_crop", "random_resized_crop", "sample_token_mask",
    "ProjectionHead", "dino_cls_loss", "ibot_loss", "koleo_loss",
    "sinkhorn_knopp", "ema_update", "DistillationModel", "PretrainConfig",
    "PretrainSession", "run_pretraining", "tiny_pretrain_config",
]
