import numpy as np
import pytest

from breathga.nn.model import batch_loss


def brute_conv(x, w, b):
    """Zero-padded 'same' cross-correlation, one output at a time."""
    batch, length, _ = x.shape
    filters, taps, _ = w.shape
    left = (taps - 1) // 2
    out = np.zeros((batch, length, filters))
    for i in range(batch):
        for l in range(length):
            for f in range(filters):
                s = b[f]
                for k in range(taps):
                    j = l + k - left
                    if 0 <= j < length:
                        s += w[f, k] @ x[i, j]
                out[i, l, f] = s
    return out


def brute_moving_average(x, window):
    return np.array([np.mean(x[max(0, n - window + 1):n + 1]) for n in range(len(x))])


def numeric_grads(model, x, y, h=1e-5):
    """Central differences of the mean batch loss for every weighted layer."""
    grads = []
    for p in model.params:
        if p is None:
            grads.append(None)
            continue
        g = {}
        for key, arr in p.items():
            num = np.zeros_like(arr)
            for j in range(arr.size):
                orig = arr.flat[j]
                arr.flat[j] = orig + h
                up = batch_loss(model.forward(x), y)
                arr.flat[j] = orig - h
                down = batch_loss(model.forward(x), y)
                arr.flat[j] = orig
                num.flat[j] = (up - down) / (2 * h)
            g[key] = num
        grads.append(g)
    return grads


def rel_error(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-300)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
