from .tensor import (
    Tensor,
    add,
    backward,
    concat,
    cross_entropy,
    dropout,
    embedding,
    is_grad_enabled,
    layer_norm,
    masked_fill,
    matmul,
    mean,
    mul,
    no_grad,
    relu,
    reshape,
    scale,
    slice_,
    softmax,
    sum_,
    transpose,
)
from .optim import AdamState, adam_step, clip_grad_norm, inverse_sqrt_lr
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import GradCheckResult, gradcheck
from .nn import Embedding, LayerNorm, Linear, Module

__all__ = [
    "Tensor", "add", "backward", "concat", "cross_entropy", "dropout", "embedding",
    "is_grad_enabled", "layer_norm", "masked_fill", "matmul", "mean", "mul", "no_grad",
    "relu", "reshape", "scale", "slice_", "softmax", "sum_", "transpose",
    "AdamState", "adam_step", "clip_grad_norm", "inverse_sqrt_lr",
    "CheckpointError", "load_checkpoint", "save_checkpoint",
    "GradCheckResult", "gradcheck",
    "Embedding", "LayerNorm", "Linear", "Module",
]
