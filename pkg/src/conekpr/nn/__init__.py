"""Dense tensor ops, layers, and the optimizer for the keypoint nets."""

from . import functional, gradcheck, layers
from .functional import (
    batchnorm,
    conv2d,
    conv2d_backward,
    conv2d_forward,
    dropout,
    linear,
    relu,
    soft_argmax,
    spatial_softmax,
    transposed_conv2d,
    upsample2x,
)
from .optim import AdamW, NonFiniteGradientError, OptimizerState, adamw_step, exp_lr, make_state
from .tensor import Parameter, ShapeError, Tensor

__all__ = [
    "AdamW",
    "NonFiniteGradientError",
    "OptimizerState",
    "Parameter",
    "ShapeError",
    "Tensor",
    "adamw_step",
    "batchnorm",
    "conv2d",
    "conv2d_backward",
    "conv2d_forward",
    "dropout",
    "exp_lr",
    "functional",
    "gradcheck",
    "layers",
    "linear",
    "make_state",
    "relu",
    "soft_argmax",
    "spatial_softmax",
    "transposed_conv2d",
    "upsample2x",
]
