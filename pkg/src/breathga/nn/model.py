"""Sequential 1D-CNN: initialisation, forward/backward passes, Adam, training."""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .layers import ShapeError, fans, output_shape, softmax, weight_shapes


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 50
    step_size: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("moment decay rates must lie in (0, 1)")


class Model:
    """Ordered layers with their parameters, trainable flags and Adam state.

    ``params[i]`` is ``None`` for parameter-free layers, otherwise a dict with
    ``"w"`` and ``"b"``. Frozen layers carry no optimizer moments.
    """

    def __init__(self, specs, input_shape, params):
        self.specs = list(specs)
        self.input_shape = tuple(int(v) for v in input_shape)
        self.shapes = shape_chain(self.specs, self.input_shape)
        self.params = params
        self._check_params()
        self.step = 0
        self.moments = [None] * len(self.specs)
        self.reset_optimizer()
        self._cache = None

    def _check_params(self):
        if len(self.params) != len(self.specs):
            raise ShapeError("parameter list does not match layer list")
        ins = [self.input_shape] + self.shapes[:-1]
        for spec, p, in_shape in zip(self.specs, self.params, ins):
            expected = weight_shapes(spec, in_shape)
            if expected is None:
                if p is not None:
                    raise ShapeError(f"{spec.kind} layer cannot hold weights")
                continue
            if p is None or p["w"].shape != expected[0] or p["b"].shape != expected[1]:
                raise ShapeError(f"weights for {spec.describe()} should be {expected}")

    def reset_optimizer(self):
        self.step = 0
        self.moments = [
            {k: (np.zeros_like(v), np.zeros_like(v)) for k, v in p.items()}
            if p is not None and spec.trainable else None
            for spec, p in zip(self.specs, self.params)
        ]

    @property
    def output_shape(self):
        return self.shapes[-1]

    @property
    def n_classes(self):
        return self.shapes[-1][0]

    def trainable_indices(self):
        return [i for i, (s, p) in enumerate(zip(self.specs, self.params))
                if p is not None and s.trainable]

    def count_params(self, trainable_only=False):
        total = 0
        for spec, p in zip(self.specs, self.params):
            if p is None or (trainable_only and not spec.trainable):
                continue
            total += p["w"].size + p["b"].size
        return total

    def summary(self):
        lines = []
        for spec, shape in zip(self.specs, self.shapes):
            flag = "" if spec.trainable or spec.kind in ("maxpool1d", "flatten") else " [frozen]"
            lines.append(f"{spec.describe():<28} -> {shape}{flag}")
        return "\n".join(lines)

    # -- passes -----------------------------------------------------------

    def forward(self, x, keep=False, upto=None):
        """Run the first ``upto`` layers (all by default) on a batch.

        Returns class probabilities when the last layer is a softmax output.
        With ``keep`` the per-layer inputs and pooling offsets are cached for
        :meth:`backward`.
        """
        a = _as_batch(x, self.input_shape)
        cache = [] if keep else None
        stop = len(self.specs) if upto is None else upto
        for spec, p in zip(self.specs[:stop], self.params[:stop]):
            aux = None
            if spec.kind == "conv1d":
                out = kernels.conv1d_forward(a, p["w"], p["b"])
                if spec.activation == "relu":
                    np.maximum(out, 0.0, out=out)
            elif spec.kind == "maxpool1d":
                out, aux = kernels.maxpool_forward(a, spec.size)
            elif spec.kind == "flatten":
                out = a.reshape(a.shape[0], -1)
            else:
                out = a @ p["w"].T + p["b"]
                if spec.kind == "softmax":
                    out = softmax(out)
                elif spec.activation == "relu":
                    np.maximum(out, 0.0, out=out)
            if keep:
                cache.append((a, out, aux))
            a = out
        if keep:
            self._cache = cache
        return a

    def backward(self, labels):
        """Gradients of the mean cross-entropy for the cached forward batch.

        Returns a list aligned with the layers: ``{"w", "b"}`` for trainable
        weighted layers, ``None`` elsewhere. Propagation stops at the lowest
        trainable layer since nothing beneath it needs a gradient.
        """
        if self._cache is None:
            raise RuntimeError("backward() called without a cached forward pass")
        if self.specs[-1].kind != "softmax":
            raise RuntimeError("backward() requires a softmax output layer")
        cache, self._cache = self._cache, None
        labels = np.asarray(labels)
        batch = labels.shape[0]
        grads = [None] * len(self.specs)
        trainable = self.trainable_indices()
        if not trainable:
            return grads
        lowest = trainable[0]

        probs = cache[-1][1]
        delta = probs.copy()
        delta[np.arange(batch), labels] -= 1.0
        delta /= batch

        for i in range(len(self.specs) - 1, lowest - 1, -1):
            spec, p = self.specs[i], self.params[i]
            a_in, a_out, aux = cache[i]
            need_w = spec.trainable and p is not None
            need_x = i > lowest
            if spec.kind in ("conv1d", "dense") and spec.activation == "relu":
                delta = delta * (a_out > 0)
            if spec.kind == "conv1d":
                dw, db, dx = kernels.conv1d_backward(
                    a_in, p["w"], np.ascontiguousarray(delta), need_w, need_x)
                if need_w:
                    grads[i] = {"w": dw, "b": db}
                delta = dx
            elif spec.kind == "maxpool1d":
                if need_x:
                    delta = kernels.maxpool_backward(
                        np.ascontiguousarray(delta), aux, spec.size, a_in.shape[1])
            elif spec.kind == "flatten":
                delta = delta.reshape(a_in.shape)
            else:
                if need_w:
                    grads[i] = {"w": delta.T @ a_in, "b": delta.sum(axis=0)}
                if need_x:
                    delta = delta @ p["w"]
        return grads

    def predict_proba(self, x, batch_size=100):
        x = _as_batch(x, self.input_shape)
        if x.shape[0] == 0:
            return np.empty((0,) + self.output_shape)
        return np.concatenate([self.forward(x[s:s + batch_size])
                               for s in range(0, x.shape[0], batch_size)])

    def predict(self, x, batch_size=100):
        return self.predict_proba(x, batch_size).argmax(axis=1)


def _as_batch(x, input_shape):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2 and input_shape[1] == 1 and x.shape[1] == input_shape[0]:
        x = x[:, :, None]
    if x.shape[1:] != input_shape:
        raise ShapeError(f"input shape {x.shape[1:]} does not match model input {input_shape}")
    return np.ascontiguousarray(x)


def shape_chain(specs, input_shape):
    """Per-layer output shapes; raises ShapeError if any length collapses to 0."""
    shapes = []
    shape = tuple(input_shape)
    for spec in specs:
        shape = output_shape(spec, shape)
        if any(v < 1 for v in shape):
            raise ShapeError(f"{spec.describe()} produces empty shape {shape}")
        shapes.append(shape)
    return shapes


def init_params(spec, in_shape, rng):
    """Glorot-uniform weights and zero bias for one layer (None if weightless)."""
    ws = weight_shapes(spec, in_shape)
    if ws is None:
        return None
    fan_in, fan_out = fans(spec, in_shape)
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return {"w": rng.uniform(-limit, limit, size=ws[0]), "b": np.zeros(ws[1])}


def init_model(specs, input_shape, seed):
    specs = list(specs)
    shapes = shape_chain(specs, input_shape)
    ins = [tuple(input_shape)] + shapes[:-1]
    rng = np.random.default_rng(seed)
    params = [init_params(s, shp, rng) for s, shp in zip(specs, ins)]
    return Model(specs, input_shape, params)


def optimizer_step(model, grads, config):
    """One bias-corrected Adam update over the trainable layers."""
    model.step += 1
    t = model.step
    b1, b2 = config.beta1, config.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for i in model.trainable_indices():
        g = grads[i]
        if g is None:
            continue
        for key, param in model.params[i].items():
            m, v = model.moments[i][key]
            m *= b1
            m += (1.0 - b1) * g[key]
            v *= b2
            v += (1.0 - b2) * np.square(g[key])
            param -= config.step_size * (m / c1) / (np.sqrt(v / c2) + config.epsilon)
    return model


def batch_loss(probs, labels):
    picked = probs[np.arange(len(labels)), labels]
    return float(-np.log(np.maximum(picked, 1e-12)).mean())


def train(model, x, y, config, on_epoch=None):
    """Mini-batch Adam training; returns a list of (loss, accuracy) per epoch.

    Batches are reshuffled each epoch from ``config.seed``; the final partial
    batch is kept. ``on_epoch(epoch, loss, acc)`` is called after each epoch.
    """
    x = _as_batch(x, model.input_shape)
    y = np.asarray(y, dtype=np.intp)
    if x.shape[0] != y.shape[0]:
        raise ShapeError("inputs and labels differ in count")
    rng = np.random.default_rng(config.seed)
    history = []
    n = x.shape[0]
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        loss_sum = 0.0
        correct = 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            probs = model.forward(x[idx], keep=True)
            loss_sum += batch_loss(probs, y[idx]) * len(idx)
            correct += int((probs.argmax(axis=1) == y[idx]).sum())
            grads = model.backward(y[idx])
            optimizer_step(model, grads, config)
        entry = (loss_sum / max(n, 1), correct / max(n, 1))
        history.append(entry)
        if on_epoch is not None:
            on_epoch(epoch, *entry)
    return history


def evaluate(model, x, y, n_classes=None):
    """Accuracy and confusion matrix (rows = true class, columns = predicted)."""
    y = np.asarray(y, dtype=np.intp)
    if y.shape[0] == 0:
        raise ValueError("cannot evaluate on an empty set")
    k = n_classes or model.n_classes
    pred = model.predict(x)
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (y, pred), 1)
    return float((pred == y).mean()), confusion
