"""Layer descriptions and single-layer forward/backward math.

Activations are float64 arrays shaped (batch, length, channels) for the
convolutional part and (batch, features) after flattening. Flattening is
length-major, so feature ``l * channels + c`` is sample ``l`` of channel ``c``.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import kernels

KINDS = ("conv1d", "maxpool1d", "flatten", "dense", "softmax")
ACTIVATIONS = ("relu", "linear")


class ShapeError(ValueError):
    """Raised when a layer cannot accept the shape flowing into it."""


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    filters: int = 0
    length: int = 0
    size: int = 0
    units: int = 0
    activation: str = "relu"
    trainable: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.kind == "conv1d" and (self.filters <= 0 or self.length <= 0):
            raise ValueError("conv1d needs positive filters and length")
        if self.kind == "maxpool1d" and self.size < 1:
            raise ValueError("maxpool1d needs size >= 1")
        if self.kind in ("dense", "softmax") and self.units <= 0:
            raise ValueError(f"{self.kind} needs positive units")

    @property
    def has_weights(self):
        return self.kind in ("conv1d", "dense", "softmax")

    def frozen(self):
        return replace(self, trainable=False)

    def describe(self):
        if self.kind == "conv1d":
            return f"conv1d({self.filters}x{self.length}, {self.activation})"
        if self.kind == "maxpool1d":
            return f"maxpool1d({self.size})"
        if self.kind == "dense":
            return f"dense({self.units}, {self.activation})"
        if self.kind == "softmax":
            return f"softmax({self.units})"
        return "flatten"


def conv1d(filters, length, activation="relu", trainable=True):
    return LayerSpec("conv1d", filters=filters, length=length,
                     activation=activation, trainable=trainable)


def maxpool1d(size):
    return LayerSpec("maxpool1d", size=size, trainable=False)


def flatten():
    return LayerSpec("flatten", trainable=False)


def dense(units, activation="relu", trainable=True):
    return LayerSpec("dense", units=units, activation=activation, trainable=trainable)


def softmax_output(units, trainable=True):
    return LayerSpec("softmax", units=units, trainable=trainable)


def output_shape(spec, in_shape):
    """Shape produced by ``spec`` for a per-sample input shape."""
    if spec.kind == "conv1d":
        if len(in_shape) != 2 or in_shape[0] < 1:
            raise ShapeError(f"conv1d expects (length, channels), got {in_shape}")
        return (in_shape[0], spec.filters)
    if spec.kind == "maxpool1d":
        if len(in_shape) != 2:
            raise ShapeError(f"maxpool1d expects (length, channels), got {in_shape}")
        if spec.size > in_shape[0]:
            raise ShapeError(f"pool size {spec.size} exceeds length {in_shape[0]}")
        return (in_shape[0] // spec.size, in_shape[1])
    if spec.kind == "flatten":
        return (int(np.prod(in_shape)),)
    if len(in_shape) != 1:
        raise ShapeError(f"{spec.kind} expects a flat input, got {in_shape}")
    return (spec.units,)


def weight_shapes(spec, in_shape):
    if spec.kind == "conv1d":
        return (spec.filters, spec.length, in_shape[1]), (spec.filters,)
    if spec.kind in ("dense", "softmax"):
        return (spec.units, in_shape[0]), (spec.units,)
    return None


def fans(spec, in_shape):
    if spec.kind == "conv1d":
        return spec.length * in_shape[1], spec.length * spec.filters
    return in_shape[0], spec.units


def softmax(logits):
    """Row-wise softmax, stabilised by subtracting the row max."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(probs, label):
    """Negative log-likelihood of ``label``; the probability is floored at 1e-12."""
    probs = np.asarray(probs, dtype=np.float64)
    if not 0 <= label < probs.shape[-1]:
        raise ValueError(f"label {label} out of range for {probs.shape[-1]} classes")
    return float(-np.log(max(probs[label], 1e-12)))


def _batched(x):
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim == 1:
        return x[None, :, None], 2
    if x.ndim == 2:
        return x[None], 1
    return x, 0


def _unbatch(y, dropped):
    if dropped == 2:
        return y[0, :, 0] if y.shape[-1] == 1 else y[0]
    if dropped == 1:
        return y[0]
    return y


def conv1d_forward(x, weights, bias, activation="relu"):
    """Stride-1 'same' cross-correlation plus bias, then the activation.

    Accepts (length, channels) or (batch, length, channels) input.
    """
    xb, dropped = _batched(x)
    w = np.ascontiguousarray(weights, dtype=np.float64)
    if w.ndim != 3 or w.shape[2] != xb.shape[2]:
        raise ShapeError(f"weights {w.shape} do not match {xb.shape[2]} input channels")
    y = kernels.conv1d_forward(xb, w, np.ascontiguousarray(bias, dtype=np.float64))
    if activation == "relu":
        np.maximum(y, 0.0, out=y)
    return _unbatch(y, dropped)


def maxpool1d_forward(x, size):
    xb, dropped = _batched(x)
    if size < 1 or size > xb.shape[1]:
        raise ShapeError(f"pool size {size} invalid for length {xb.shape[1]}")
    y, _ = kernels.maxpool_forward(xb, size)
    return _unbatch(y, dropped)


def dense_forward(x, weights, bias, activation="relu"):
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if x.shape[-1] != w.shape[1]:
        raise ShapeError(f"input width {x.shape[-1]} does not match weights {w.shape}")
    y = x @ w.T + bias
    if activation == "relu":
        y = np.maximum(y, 0.0)
    return y
