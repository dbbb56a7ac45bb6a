from .layers import (BatchNorm1d, BatchTooSmall, Conv1d, Dense, Flatten,
                     ReLU, Sequential, ShapeMismatch, glorot_uniform,
                     softmax_xent)
from .optim import Adam
from .gradcheck import grad_check, check_softmax_xent
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "BatchNorm1d", "BatchTooSmall", "Conv1d", "Dense", "Flatten", "ReLU",
    "Sequential", "ShapeMismatch", "glorot_uniform", "softmax_xent",
    "Adam", "grad_check", "check_softmax_xent",
    "load_checkpoint", "save_checkpoint",
]
