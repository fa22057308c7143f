"""From-scratch 1D-CNN engine (64-bit throughout)."""

from .io import ModelFormatError, load_model, save_model
from .kernels import BACKEND
from .layers import (
    LayerSpec,
    ShapeError,
    conv1d,
    conv1d_forward,
    cross_entropy,
    dense,
    dense_forward,
    flatten,
    maxpool1d,
    maxpool1d_forward,
    softmax,
    softmax_output,
)
from .model import (
    Model,
    TrainConfig,
    evaluate,
    init_model,
    optimizer_step,
    shape_chain,
    train,
)

__all__ = [
    "BACKEND", "LayerSpec", "Model", "ModelFormatError", "ShapeError", "TrainConfig",
    "conv1d", "conv1d_forward", "cross_entropy", "dense", "dense_forward", "evaluate",
    "flatten", "init_model", "load_model", "maxpool1d", "maxpool1d_forward",
    "optimizer_step", "save_model", "shape_chain", "softmax", "softmax_output", "train",
]
