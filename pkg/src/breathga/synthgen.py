"""Synthetic 8-class respiration waveforms and their binary dataset file.

Breaths follow ``A * sin^6(pi * f * t + phase)``; rate and depth ranges per
class are the clinical bands for eupnea, apnea, tachypnea, bradypnea,
hyperpnea, hypopnea and Kussmaul breathing. Class 7 holds faulty recordings:
valid breathing with injected step, spike or saturation artifacts.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

N_CLASSES = 8
FAULTY = 7
ARTIFACT_KINDS = ("step", "spike", "saturation")


@dataclass(frozen=True)
class BreathClassSpec:
    class_id: int
    name: str
    rate_range: tuple
    depth_range: tuple
    faulty: bool = False


_TABLE = (
    BreathClassSpec(0, "Eupnea", (12.0, 20.0), (30.0, 58.0)),
    BreathClassSpec(1, "Apnea", (0.0, 0.0), (0.0, 0.0)),
    BreathClassSpec(2, "Tachypnea", (21.0, 50.0), (30.0, 58.0)),
    BreathClassSpec(3, "Bradypnea", (1.0, 11.0), (30.0, 58.0)),
    BreathClassSpec(4, "Hyperpnea", (12.0, 20.0), (59.0, 100.0)),
    BreathClassSpec(5, "Hypopnea", (12.0, 20.0), (1.0, 29.0)),
    BreathClassSpec(6, "Kussmaul's", (21.0, 50.0), (59.0, 100.0)),
    # any rate/depth: the hull of the other classes
    BreathClassSpec(7, "Faulty data", (0.0, 50.0), (0.0, 100.0), faulty=True),
)

CLASS_NAMES = tuple(s.name for s in _TABLE)


def class_table():
    return list(_TABLE)


@dataclass
class GenConfig:
    fs_hz: float = 100.0
    duration_s: float = 30.0
    records_per_class: int = 300
    distances_m: tuple = (0.5, 1.0, 1.5)
    noise_std: float = 0.02
    trend_max_coeff: float = 0.2
    distance_gain: dict = field(default_factory=lambda: {0.5: 1.0, 1.0: 0.55, 1.5: 0.3})
    seed: int = 0

    def __post_init__(self):
        if self.fs_hz <= 0 or self.duration_s <= 0:
            raise ValueError("fs_hz and duration_s must be positive")
        n = self.fs_hz * self.duration_s
        if abs(n - round(n)) > 1e-9:
            raise ValueError("fs_hz * duration_s must be a whole number of samples")
        if self.records_per_class < 1:
            raise ValueError("records_per_class must be positive")
        if not self.distances_m or self.records_per_class % len(self.distances_m):
            raise ValueError("records_per_class must divide evenly across distances")
        if self.noise_std < 0 or self.trend_max_coeff < 0:
            raise ValueError("noise_std and trend_max_coeff must be non-negative")
        self.distances_m = tuple(float(d) for d in self.distances_m)
        self.distance_gain = {float(k): float(v) for k, v in self.distance_gain.items()}

    @property
    def n_samples(self):
        return int(round(self.fs_hz * self.duration_s))


@dataclass(eq=False)
class BreathRecord:
    samples: np.ndarray
    class_id: int
    rate_bpm: float
    depth_pct: float
    distance_m: float
    seed_tag: int = 0

    def __eq__(self, other):
        # seed_tag is bookkeeping only and is not stored on disk
        if not isinstance(other, BreathRecord):
            return NotImplemented
        return (self.class_id == other.class_id
                and self.rate_bpm == other.rate_bpm
                and self.depth_pct == other.depth_pct
                and self.distance_m == other.distance_m
                and self.samples.shape == other.samples.shape
                and np.array_equal(self.samples, other.samples))

    def with_samples(self, samples):
        return BreathRecord(samples, self.class_id, self.rate_bpm, self.depth_pct,
                            self.distance_m, self.seed_tag)


def sample_params(spec, rng):
    """Draw (rate_bpm, depth_pct) uniformly from the class rectangle.

    The faulty class draws from a randomly chosen non-faulty class.
    """
    if spec.faulty:
        spec = _TABLE[int(rng.integers(0, FAULTY))]
    rate = rng.uniform(*spec.rate_range) if spec.rate_range[1] > spec.rate_range[0] else spec.rate_range[0]
    depth = rng.uniform(*spec.depth_range) if spec.depth_range[1] > spec.depth_range[0] else spec.depth_range[0]
    return float(rate), float(depth)


def synth_waveform(rate_bpm, depth_pct, fs_hz, duration_s, phase=0.0):
    if rate_bpm < 0 or depth_pct < 0:
        raise ValueError("rate and depth must be non-negative")
    if fs_hz <= 0:
        raise ValueError("fs_hz must be positive")
    n = int(round(duration_s * fs_hz))
    t = np.arange(n) / fs_hz
    return (depth_pct / 100.0) * np.sin(np.pi * (rate_bpm / 60.0) * t + phase) ** 6


def _unit_abscissa(n):
    return np.linspace(-1.0, 1.0, n) if n > 1 else np.zeros(n)


def corrupt(samples, distance_m, cfg, rng):
    """Scale by distance gain, add Gaussian noise and a random quadratic drift."""
    try:
        gain = cfg.distance_gain[float(distance_m)]
    except KeyError:
        raise KeyError(f"no gain configured for distance {distance_m} m") from None
    x = gain * np.asarray(samples, dtype=np.float64)
    noise = rng.normal(0.0, cfg.noise_std, size=x.shape) if cfg.noise_std > 0 else 0.0
    coeffs = rng.uniform(-cfg.trend_max_coeff, cfg.trend_max_coeff, size=3)
    t = _unit_abscissa(x.shape[0])
    trend = coeffs[0] + coeffs[1] * t + coeffs[2] * t * t
    return x + noise + trend


def apply_artifact(x, kind, start, length, value):
    """Return a copy of ``x`` with one artifact.

    ``step`` adds ``value`` from ``start`` to the end, ``spike`` adds ``value``
    over ``length`` samples and ``saturation`` clamps ``length`` samples to
    ``value``.
    """
    y = np.array(x, dtype=np.float64, copy=True)
    stop = min(y.shape[0], start + length)
    if kind == "step":
        y[start:] += value
    elif kind == "spike":
        y[start:stop] += value
    elif kind == "saturation":
        y[start:stop] = value
    else:
        raise ValueError(f"unknown artifact kind {kind!r}")
    return y


def make_faulty(base, rng, fs_hz=100.0, min_scale=0.05):
    """Inject 1-4 artifacts at uniform positions.

    Step and spike heights are 3-6 times the base peak (at least ``min_scale``);
    saturation runs last 1-5 s at a rail above the signal.
    """
    base = np.asarray(base, dtype=np.float64)
    n = base.shape[0]
    peak = max(float(np.abs(base).max()) if n else 0.0, min_scale)
    y = base.copy()
    for _ in range(int(rng.integers(1, 5))):
        kind = ARTIFACT_KINDS[int(rng.integers(0, len(ARTIFACT_KINDS)))]
        sign = 1.0 if rng.random() < 0.5 else -1.0
        if kind == "saturation":
            length = int(rng.integers(int(fs_hz), int(5 * fs_hz) + 1))
            length = min(length, n)
            value = sign * peak * rng.uniform(1.5, 3.0)
        else:
            length = int(rng.integers(1, 6)) if kind == "spike" else n
            value = sign * peak * rng.uniform(3.0, 6.0)
        start = int(rng.integers(0, max(n - min(length, n), 0) + 1)) if kind != "step" else int(rng.integers(0, n))
        y = apply_artifact(y, kind, start, length, value)
    return y


def generate_record(cfg, class_id, distance_m, index):
    """Build one record from its own random stream keyed by (seed, index)."""
    rng = np.random.default_rng([cfg.seed, index])
    spec = _TABLE[class_id]
    rate, depth = sample_params(spec, rng)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    clean = synth_waveform(rate, depth, cfg.fs_hz, cfg.duration_s, phase)
    x = corrupt(clean, distance_m, cfg, rng)
    if spec.faulty:
        x = make_faulty(x, rng, cfg.fs_hz)
    return BreathRecord(x, class_id, rate, depth, float(distance_m), index)


def record_plan(cfg):
    """(class_id, distance) for every record index, class-major."""
    per_distance = cfg.records_per_class // len(cfg.distances_m)
    return [(c, d) for c in range(N_CLASSES) for d in cfg.distances_m for _ in range(per_distance)]


def generate_dataset(cfg):
    return [generate_record(cfg, c, d, i) for i, (c, d) in enumerate(record_plan(cfg))]


def clean_signal(cfg, record):
    """Regenerate the uncorrupted, gain-scaled waveform behind ``record``."""
    rng = np.random.default_rng([cfg.seed, record.seed_tag])
    sample_params(_TABLE[record.class_id], rng)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    clean = synth_waveform(record.rate_bpm, record.depth_pct, cfg.fs_hz, cfg.duration_s, phase)
    return cfg.distance_gain[record.distance_m] * clean


# -- dataset file -----------------------------------------------------------

MAGIC = b"RSPD"
VERSION = 1
_HEADER = struct.Struct("<4sHIIdd")


class DatasetFormatError(ValueError):
    pass


def _record_dtype(n_samples):
    return np.dtype([("class_id", "u1"), ("distance_m", "<f8"), ("rate_bpm", "<f8"),
                     ("depth_pct", "<f8"), ("samples", "<f8", (n_samples,))])


def write_dataset(records, path, fs_hz=100.0, duration_s=30.0):
    n_samples = records[0].samples.shape[0] if records else int(round(fs_hz * duration_s))
    table = np.zeros(len(records), dtype=_record_dtype(n_samples))
    for i, r in enumerate(records):
        if r.samples.shape != (n_samples,):
            raise ValueError("all records must have the same length")
        table[i] = (r.class_id, r.distance_m, r.rate_bpm, r.depth_pct, r.samples)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, len(records), n_samples, fs_hz, duration_s))
        fh.write(table.tobytes())


def read_dataset(path, with_header=False):
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < _HEADER.size:
        raise DatasetFormatError("dataset file is truncated")
    magic, version, count, n_samples, fs_hz, duration_s = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise DatasetFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise DatasetFormatError(f"unsupported dataset version {version}")
    dtype = _record_dtype(n_samples)
    body = buf[_HEADER.size:]
    if len(body) != count * dtype.itemsize:
        raise DatasetFormatError(
            f"expected {count * dtype.itemsize} record bytes, found {len(body)}")
    table = np.frombuffer(body, dtype=dtype, count=count)
    records = [BreathRecord(np.array(row["samples"], dtype=np.float64), int(row["class_id"]),
                            float(row["rate_bpm"]), float(row["depth_pct"]),
                            float(row["distance_m"]), i)
               for i, row in enumerate(table)]
    if with_header:
        return records, {"fs_hz": fs_hz, "duration_s": duration_s, "n_samples": n_samples}
    return records


def export_csv(records, path):
    """Plain-text export: one row per record, label first, then the samples."""
    with open(path, "w") as fh:
        for r in records:
            fh.write(",".join([str(r.class_id)] + [repr(float(v)) for v in r.samples]))
            fh.write("\n")


def records_to_arrays(records):
    x = np.stack([r.samples for r in records]) if records else np.empty((0, 0))
    y = np.array([r.class_id for r in records], dtype=np.intp)
    return x, y
