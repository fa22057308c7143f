"""Pre-trained base network, trimming, and chromosome-defined head extension."""

from dataclasses import dataclass, replace

import numpy as np

from . import dsp
from .nn import (
    Model,
    TrainConfig,
    conv1d,
    dense,
    evaluate,
    flatten,
    init_model,
    maxpool1d,
    shape_chain,
    softmax_output,
    train,
)
from .nn.model import init_params
from .synthgen import N_CLASSES, records_to_arrays

PAPER_FILTERS = (256, 128, 64)
PAPER_LENGTHS = (64, 32, 16)
PAPER_DENSE = 64
# conv1, pool1, conv2, pool2
TRIM_DEPTH = 4


def base_specs(filters=PAPER_FILTERS, lengths=PAPER_LENGTHS, dense_units=PAPER_DENSE,
               n_classes=N_CLASSES):
    """Three conv/pool stages, flatten, a ReLU dense layer and a softmax output."""
    specs = []
    for f, k in zip(filters, lengths):
        specs += [conv1d(f, k), maxpool1d(2)]
    specs += [flatten(), dense(dense_units), softmax_output(n_classes)]
    return specs


def _check_base(model):
    kinds = [s.kind for s in model.specs]
    expected = ["conv1d", "maxpool1d"] * 3 + ["flatten", "dense", "softmax"]
    if kinds != expected:
        raise ValueError(f"not a base model layout: {kinds}")


@dataclass
class PretrainResult:
    model: Model
    history: list
    train_accuracy: float
    test_accuracy: float
    n_train: int
    n_test: int


def pretrain_base(records, config, specs=None, seed=0, split_seed=None, on_epoch=None):
    """Flip-augment, split 80/20 by class, and train the base network.

    ``records`` must already be preprocessed.
    """
    augmented = dsp.augment_flip(records)
    train_set, test_set = dsp.stratified_split(augmented, 0.8, seed if split_seed is None else split_seed)
    x_tr, y_tr = records_to_arrays(train_set)
    x_te, y_te = records_to_arrays(test_set)
    model = init_model(specs or base_specs(), (x_tr.shape[1], 1), seed)
    history = train(model, x_tr, y_tr, config, on_epoch=on_epoch)
    train_acc, _ = evaluate(model, x_tr, y_tr)
    test_acc, _ = evaluate(model, x_te, y_te)
    return PretrainResult(model, history, train_acc, test_acc, len(train_set), len(test_set))


def trim(base):
    """Keep conv1/pool1/conv2/pool2 with their weights, all frozen."""
    _check_base(base)
    specs = [s.frozen() for s in base.specs[:TRIM_DEPTH]]
    return Model(specs, base.input_shape, list(base.params[:TRIM_DEPTH]))


def head_specs(kernels, kernel_length, pool, units, n_classes=N_CLASSES):
    return [conv1d(kernels, kernel_length), maxpool1d(pool), flatten(), dense(units),
            softmax_output(n_classes)]


def extend(trimmed, arch, seed, n_classes=N_CLASSES):
    """Append a fresh trainable head to a frozen prefix.

    ``arch`` is (kernels, kernel_length, pool, units), already decoded. The
    prefix parameter arrays are shared with ``trimmed``, not copied.
    """
    head = head_specs(*arch, n_classes=n_classes)
    specs = list(trimmed.specs) + head
    shapes = shape_chain(specs, trimmed.input_shape)
    rng = np.random.default_rng(seed)
    in_shape = shapes[len(trimmed.specs) - 1]
    params = list(trimmed.params)
    for spec in head:
        params.append(init_params(spec, in_shape, rng))
        in_shape = shape_chain([spec], in_shape)[0]
    return Model(specs, trimmed.input_shape, params)


def scratch_model(trimmed_specs, arch, input_shape, seed, n_classes=N_CLASSES):
    """Same architecture as ``extend`` but every layer fresh and trainable."""
    prefix = [s if not s.has_weights else replace(s, trainable=True) for s in trimmed_specs]
    return init_model(prefix + head_specs(*arch, n_classes=n_classes), input_shape, seed)


def train_eval(model, train_set, test_set, config, on_epoch=None):
    """Train, tracking test accuracy after every epoch.

    Returns (history, test_curve) where history holds (loss, train_acc).
    """
    x_tr, y_tr = records_to_arrays(train_set)
    x_te, y_te = records_to_arrays(test_set)
    curve = []

    def hook(epoch, loss, acc):
        curve.append(evaluate(model, x_te, y_te)[0])
        if on_epoch is not None:
            on_epoch(epoch, loss, acc, curve[-1])

    history = train(model, x_tr, y_tr, config, on_epoch=hook)
    return history, curve


__all__ = ["PAPER_FILTERS", "PAPER_LENGTHS", "PretrainResult", "TrainConfig", "base_specs",
           "extend", "head_specs", "pretrain_base", "scratch_model", "train_eval", "trim"]
