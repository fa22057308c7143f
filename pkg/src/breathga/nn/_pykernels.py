"""Pure numpy implementations of the hot convolution and pooling kernels.

Every function here has a twin in ``_ckernels.pyx`` with the same signature.
Arrays are float64, C-contiguous, laid out as (batch, length, channels);
conv weights are (filters, taps, in_channels).
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

# im2col buffers are built in chunks of samples so a batch never needs more
# than this many float64 elements at once.
_CHUNK_ELEMS = 1 << 22


def same_padding(taps):
    """Left/right zero padding for a stride-1 'same' convolution."""
    left = (taps - 1) // 2
    return left, taps - 1 - left


def _pad(x, taps):
    left, right = same_padding(taps)
    return np.pad(x, ((0, 0), (left, right), (0, 0)))


def _chunks(batch, per_sample):
    step = max(1, _CHUNK_ELEMS // max(per_sample, 1))
    for start in range(0, batch, step):
        yield slice(start, min(batch, start + step))


def _cols(xp, taps, length):
    # (b, L, C, K) window view -> (b*L, K*C) with tap-major columns
    win = sliding_window_view(xp, taps, axis=1)[:, :length]
    b, _, c, k = win.shape
    return win.transpose(0, 1, 3, 2).reshape(b * length, k * c)


def conv1d_forward(x, w, b):
    batch, length, cin = x.shape
    filters, taps, _ = w.shape
    xp = _pad(x, taps)
    wmat = w.reshape(filters, taps * cin)
    out = np.empty((batch, length, filters))
    for sl in _chunks(batch, length * taps * cin):
        cols = _cols(xp[sl], taps, length)
        out[sl] = (cols @ wmat.T).reshape(-1, length, filters)
    out += b
    return out


def conv1d_backward(x, w, dy, need_dw=True, need_dx=True):
    """Gradients of a linear 'same' conv; returns (dw, db, dx), None where skipped."""
    batch, length, cin = x.shape
    filters, taps, _ = w.shape
    wmat = w.reshape(filters, taps * cin)
    dw = db = dx = None
    if need_dw:
        xp = _pad(x, taps)
        dwmat = np.zeros((filters, taps * cin))
        for sl in _chunks(batch, length * taps * cin):
            cols = _cols(xp[sl], taps, length)
            dwmat += dy[sl].reshape(-1, filters).T @ cols
        dw = dwmat.reshape(filters, taps, cin)
        db = dy.sum(axis=(0, 1))
    if need_dx:
        left, _ = same_padding(taps)
        dxp = np.zeros((batch, length + taps - 1, cin))
        for sl in _chunks(batch, length * taps * cin):
            dcols = (dy[sl].reshape(-1, filters) @ wmat).reshape(-1, length, taps, cin)
            for k in range(taps):
                dxp[sl, k:k + length] += dcols[:, :, k]
        dx = np.ascontiguousarray(dxp[:, left:left + length])
    return dw, db, dx


def maxpool_forward(x, size):
    """Non-overlapping max pool; returns pooled values and the winning offsets."""
    batch, length, ch = x.shape
    out_len = length // size
    win = x[:, :out_len * size].reshape(batch, out_len, size, ch)
    arg = win.argmax(axis=2)
    out = np.take_along_axis(win, arg[:, :, None, :], axis=2)[:, :, 0, :]
    return np.ascontiguousarray(out), arg.astype(np.intp)


def maxpool_backward(dy, arg, size, length):
    batch, out_len, ch = dy.shape
    dwin = np.zeros((batch, out_len, size, ch))
    np.put_along_axis(dwin, arg[:, :, None, :], dy[:, :, None, :], axis=2)
    dx = np.zeros((batch, length, ch))
    dx[:, :out_len * size] = dwin.reshape(batch, out_len * size, ch)
    return dx
