from .checkpoint import load_checkpoint, save_checkpoint
from .flow import (
    CMABlock,
    ModelConfig,
    VectorFieldNet,
    build_net,
    linear_attention,
    sinusoidal_features,
)
from .gradcheck import grad_check
from .sampling import sample, sample_batch
from .train import (
    Batch,
    TrainConfig,
    TrainState,
    align_reg,
    alignment_penalty,
    cfm_loss,
    cfm_loss_parts,
    collate,
    corrupt_references,
    train,
)

__all__ = [
    "Batch",
    "CMABlock",
    "ModelConfig",
    "TrainConfig",
    "TrainState",
    "VectorFieldNet",
    "align_reg",
    "alignment_penalty",
    "build_net",
    "cfm_loss",
    "cfm_loss_parts",
    "collate",
    "corrupt_references",
    "grad_check",
    "linear_attention",
    "load_checkpoint",
    "sample",
    "sample_batch",
    "save_checkpoint",
    "sinusoidal_features",
    "train",
]
