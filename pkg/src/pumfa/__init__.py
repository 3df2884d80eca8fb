"""Point cloud upsampling with multi-scale cross-attention refinement."""

from .attention_maps import AttentionReport, dump_attention
from .config import TrainConfig, load_train_config
from .dataset import generate_dataset
from .evaluation import NOISE_LEVELS, evaluate
from .inference import upsample_cloud
from .losses import (
    LossSchedule,
    chamfer_distance,
    density_aware_chamfer,
    hausdorff_distance,
    point_to_surface,
    total_loss,
)
from .network import ModelConfig, ModelParams, pumfa_forward
from .training import TrainResult, load_model, train

__version__ = "0.1.0"

__all__ = [
    "ModelConfig",
    "ModelParams",
    "pumfa_forward",
    "LossSchedule",
    "total_loss",
    "chamfer_distance",
    "density_aware_chamfer",
    "hausdorff_distance",
    "point_to_surface",
    "TrainConfig",
    "load_train_config",
    "generate_dataset",
    "train",
    "TrainResult",
    "load_model",
    "upsample_cloud",
    "evaluate",
    "NOISE_LEVELS",
    "dump_attention",
    "AttentionReport",
    "__version__",
]
