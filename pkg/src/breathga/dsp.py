"""Preprocessing: trailing moving average, polynomial detrending, flip
augmentation and stratified splitting."""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .synthgen import BreathRecord


def moving_average(x, window):
    """Trailing-window mean with the window shrinking at the start.

    ``y[n] = mean(x[max(0, n - window + 1) : n + 1])``, same length as ``x``.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] == 0:
        raise ValueError("moving_average needs a non-empty 1-D input")
    if window < 1 or window > x.shape[0]:
        raise ValueError(f"window {window} invalid for length {x.shape[0]}")
    if window == 1:
        return x.copy()
    # direct windowed sums; a running cumsum would drift by rounding
    padded = np.concatenate([np.zeros(window - 1), x])
    sums = sliding_window_view(padded, window).sum(axis=1)
    counts = np.minimum(np.arange(1, x.shape[0] + 1), window)
    return sums / counts


def _vander(n, degree):
    t = np.linspace(-1.0, 1.0, n) if n > 1 else np.zeros(n)
    return np.polynomial.legendre.legvander(t, degree)


def poly_fit(x, degree):
    """Least-squares coefficients (Legendre basis over t in [-1, 1])."""
    x = np.asarray(x, dtype=np.float64)
    if degree < 0:
        raise ValueError("degree must be non-negative")
    if x.shape[0] <= degree:
        raise ValueError(f"need more than {degree} samples for a degree-{degree} fit")
    basis = _vander(x.shape[0], degree)
    coef, *_ = np.linalg.lstsq(basis, x, rcond=None)
    return coef, basis


def poly_detrend(x, degree=5):
    coef, basis = poly_fit(x, degree)
    return np.asarray(x, dtype=np.float64) - basis @ coef


def horizontal_flip(x):
    return np.asarray(x)[::-1].copy()


def augment_flip(records):
    """Originals followed by a time-reversed copy of each, same labels."""
    flipped = [r.with_samples(horizontal_flip(r.samples)) for r in records]
    return list(records) + flipped


def _by_class(records):
    by_class = {}
    for i, r in enumerate(records):
        by_class.setdefault(r.class_id, []).append(i)
    return {cls: np.array(by_class[cls]) for cls in sorted(by_class)}


def _take(records, by_class, quotas, rng):
    train_idx, test_idx = [], []
    for cls, idx in by_class.items():
        idx = idx[rng.permutation(len(idx))]
        train_idx.extend(idx[:quotas[cls]].tolist())
        test_idx.extend(idx[quotas[cls]:].tolist())
    train_idx.sort()
    test_idx.sort()
    return [records[i] for i in train_idx], [records[i] for i in test_idx]


def stratified_split(records, train_fraction, seed):
    """Per-class seeded shuffle; round(fraction * count) of each class to train."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    by_class = _by_class(records)
    quotas = {cls: int(round(train_fraction * len(idx))) for cls, idx in by_class.items()}
    return _take(records, by_class, quotas, np.random.default_rng(seed))


def stratified_subset(records, size, seed):
    """Seeded class-balanced sample of exactly ``size`` records (in original order).

    Class quotas are proportional; leftover slots go to the largest
    fractional remainders, lower class first on ties.
    """
    if size >= len(records):
        return list(records)
    by_class = _by_class(records)
    exact = {cls: size * len(idx) / len(records) for cls, idx in by_class.items()}
    quotas = {cls: int(np.floor(q)) for cls, q in exact.items()}
    spare = size - sum(quotas.values())
    for cls in sorted(exact, key=lambda c: (-(exact[c] - quotas[c]), c))[:spare]:
        quotas[cls] += 1
    return _take(records, by_class, quotas, np.random.default_rng(seed))[0]


def preprocess_samples(x, window=50, degree=5):
    return poly_detrend(moving_average(x, window), degree)


def preprocess(record, window=50, degree=5):
    return BreathRecord(preprocess_samples(record.samples, window, degree), record.class_id,
                        record.rate_bpm, record.depth_pct, record.distance_m, record.seed_tag)
