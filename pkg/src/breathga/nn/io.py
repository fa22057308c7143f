"""Binary model files.

Layout (little-endian)::

    "RNN1"  u16 version=1  u16 layer_count  u32 input_length  u32 input_channels
    per layer: u8 kind  u8 trainable  u32 hyperparameters...  f64 weights...

Hyperparameters per kind: conv1d (filters, length, activation), maxpool1d
(size), flatten (none), dense (units, activation), softmax (units).
Activation codes: 0 relu, 1 linear. Weights follow as conv [filter][tap][channel]
or dense [out][in], each followed by the bias vector. Optimizer state is not
stored.
"""

import struct

import numpy as np

from .layers import ACTIVATIONS, LayerSpec, weight_shapes
from .model import Model, shape_chain

MAGIC = b"RNN1"
VERSION = 1
KIND_TAGS = {"conv1d": 1, "maxpool1d": 2, "flatten": 3, "dense": 4, "softmax": 5}
_TAG_KINDS = {v: k for k, v in KIND_TAGS.items()}
_HEADER = struct.Struct("<4sHHII")


class ModelFormatError(ValueError):
    pass


def _hyper(spec):
    act = ACTIVATIONS.index(spec.activation)
    return {
        "conv1d": (spec.filters, spec.length, act),
        "maxpool1d": (spec.size,),
        "flatten": (),
        "dense": (spec.units, act),
        "softmax": (spec.units,),
    }[spec.kind]


def dumps(model):
    parts = [_HEADER.pack(MAGIC, VERSION, len(model.specs), *model.input_shape)]
    for spec, p in zip(model.specs, model.params):
        hyper = _hyper(spec)
        parts.append(struct.pack(f"<BB{len(hyper)}I", KIND_TAGS[spec.kind],
                                 int(spec.trainable), *hyper))
        if p is not None:
            parts.append(p["w"].astype("<f8").tobytes())
            parts.append(p["b"].astype("<f8").tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise ModelFormatError("model file is truncated")
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt):
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size))

    def array(self, shape):
        count = int(np.prod(shape))
        return np.frombuffer(self.take(8 * count), dtype="<f8").astype(np.float64).reshape(shape)


def loads(buf):
    r = _Reader(bytes(buf))
    magic, version, n_layers, length, channels = r.unpack(_HEADER.format)
    if magic != MAGIC:
        raise ModelFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ModelFormatError(f"unsupported model version {version}")
    specs = []
    params = []
    shape = (length, channels)
    for _ in range(n_layers):
        tag, trainable = r.unpack("<BB")
        kind = _TAG_KINDS.get(tag)
        if kind is None:
            raise ModelFormatError(f"unknown layer tag {tag}")
        n_hyper = {"conv1d": 3, "maxpool1d": 1, "flatten": 0, "dense": 2, "softmax": 1}[kind]
        hyper = r.unpack(f"<{n_hyper}I")
        try:
            if kind == "conv1d":
                spec = LayerSpec(kind, filters=hyper[0], length=hyper[1],
                                 activation=ACTIVATIONS[hyper[2]], trainable=bool(trainable))
            elif kind == "maxpool1d":
                spec = LayerSpec(kind, size=hyper[0], trainable=bool(trainable))
            elif kind == "flatten":
                spec = LayerSpec(kind, trainable=bool(trainable))
            elif kind == "dense":
                spec = LayerSpec(kind, units=hyper[0], activation=ACTIVATIONS[hyper[1]],
                                 trainable=bool(trainable))
            else:
                spec = LayerSpec(kind, units=hyper[0], trainable=bool(trainable))
            shape_chain([spec], shape)
        except (ValueError, IndexError) as exc:
            raise ModelFormatError(f"inconsistent layer {len(specs)}: {exc}") from exc
        ws = weight_shapes(spec, shape)
        params.append(None if ws is None else {"w": r.array(ws[0]), "b": r.array(ws[1])})
        specs.append(spec)
        shape = shape_chain([spec], shape)[0]
    if r.pos != len(r.buf):
        raise ModelFormatError("trailing bytes after last layer")
    return Model(specs, (length, channels), params)


def save_model(model, path):
    data = dumps(model)
    with open(path, "wb") as fh:
        fh.write(data)


def load_model(path):
    with open(path, "rb") as fh:
        return loads(fh.read())
