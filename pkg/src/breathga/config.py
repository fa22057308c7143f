"""Run configuration: profile defaults, optional config file, flag overrides."""

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import yaml


class ConfigError(ValueError):
    pass


class UnknownKeyError(ConfigError):
    pass


class RangeError(ConfigError):
    pass


class MissingFieldError(ConfigError):
    pass


@dataclass(frozen=True)
class RunConfig:
    profile: str = "paper"
    seed: int = 0
    threads: int = 1
    # data
    fs_hz: float = 100.0
    duration_s: float = 30.0
    records_per_class: int = 300
    distances_m: tuple = (0.5, 1.0, 1.5)
    noise_std: float = 0.02
    trend_max_coeff: float = 0.2
    # preprocessing
    ma_window: int = 50
    detrend_degree: int = 5
    # networks
    base_filters: tuple = (256, 128, 64)
    base_lengths: tuple = (64, 32, 16)
    base_dense: int = 64
    pretrain_epochs: int = 30
    final_epochs: int = 30
    batch_size: int = 50
    step_size: float = 1e-3
    # genetic search
    generations: int = 200
    parent_strategy: str = "roulette"
    subset_size: int = 1000
    crossover_prob: float = 0.8
    mutation_prob: float = 0.4
    # train-final
    chromosome: tuple = None
    mode: str = "both"

    @property
    def n_samples(self):
        return int(round(self.fs_hz * self.duration_s))


PROFILES = {
    "paper": {},
    "desk": {
        "fs_hz": 20.0,
        "records_per_class": 42,
        "ma_window": 10,
        "base_filters": (64, 32, 16),
        "subset_size": 200,
        "generations": 20,
    },
}

_FIELDS = {f.name: f for f in fields(RunConfig)}
_TUPLE_FIELDS = {"distances_m", "base_filters", "base_lengths", "chromosome"}
_OPTIONAL = {"chromosome"}


def _coerce(key, value):
    if value is None:
        if key in _OPTIONAL:
            return None
        raise MissingFieldError(f"{key}: a value is required")
    default = RunConfig.__dataclass_fields__[key].default
    try:
        if key in _TUPLE_FIELDS:
            if isinstance(value, str):
                value = [v for v in value.replace("[", "").replace("]", "").split(",") if v.strip()]
            cast = float if key == "distances_m" else int
            return tuple(cast(v) for v in value)
        if isinstance(default, bool):
            return bool(value)
        if isinstance(default, int):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if isinstance(default, float):
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise RangeError(f"{key}: cannot interpret {value!r}") from None


def validate(cfg):
    def need(cond, key, msg):
        if not cond:
            raise RangeError(f"{key}: {msg} (got {getattr(cfg, key)!r})")

    need(cfg.profile in PROFILES, "profile", f"must be one of {sorted(PROFILES)}")
    need(cfg.threads >= 1, "threads", "must be >= 1")
    need(cfg.fs_hz > 0, "fs_hz", "must be positive")
    need(cfg.duration_s > 0, "duration_s", "must be positive")
    n = cfg.fs_hz * cfg.duration_s
    need(abs(n - round(n)) < 1e-9, "duration_s", "fs_hz * duration_s must be whole")
    need(cfg.records_per_class >= 1, "records_per_class", "must be positive")
    need(len(cfg.distances_m) >= 1, "distances_m", "needs at least one distance")
    need(cfg.records_per_class % len(cfg.distances_m) == 0, "records_per_class",
         "must divide evenly across distances")
    need(cfg.noise_std >= 0, "noise_std", "must be >= 0")
    need(cfg.trend_max_coeff >= 0, "trend_max_coeff", "must be >= 0")
    need(1 <= cfg.ma_window <= cfg.n_samples, "ma_window", "must lie in [1, samples]")
    need(0 <= cfg.detrend_degree < cfg.n_samples, "detrend_degree", "must lie in [0, samples)")
    need(len(cfg.base_filters) == 3 and min(cfg.base_filters) > 0, "base_filters",
         "needs three positive counts")
    need(len(cfg.base_lengths) == 3 and min(cfg.base_lengths) > 0, "base_lengths",
         "needs three positive lengths")
    need(cfg.base_dense > 0, "base_dense", "must be positive")
    need(cfg.pretrain_epochs >= 1, "pretrain_epochs", "must be >= 1")
    need(cfg.final_epochs >= 1, "final_epochs", "must be >= 1")
    need(cfg.batch_size >= 1, "batch_size", "must be >= 1")
    need(cfg.step_size > 0, "step_size", "must be positive")
    need(cfg.generations >= 0, "generations", "must be >= 0")
    need(cfg.parent_strategy in ("topk", "roulette"), "parent_strategy",
         "must be topk or roulette")
    need(cfg.subset_size >= 16, "subset_size", "must be >= 16")
    need(0.0 <= cfg.crossover_prob <= 1.0, "crossover_prob", "must lie in [0, 1]")
    need(0.0 <= cfg.mutation_prob <= 1.0, "mutation_prob", "must lie in [0, 1]")
    need(cfg.mode in ("transfer", "scratch", "both"), "mode", "must be transfer, scratch or both")
    if cfg.chromosome is not None:
        from .ga import Chromosome
        try:
            Chromosome.from_genes(cfg.chromosome)
        except (TypeError, ValueError) as exc:
            raise RangeError(f"chromosome: {exc}") from None
    return cfg


def load_file(path):
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        data = json.loads(text)
    else:
        data = yaml.safe_load(text)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def build_config(file_values=None, overrides=None):
    """Profile defaults, then the file, then flags; returns a validated config."""
    file_values = dict(file_values or {})
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    merged = {}
    for source in (file_values, overrides):
        for key, value in source.items():
            key = key.replace("-", "_")
            if key not in _FIELDS:
                raise UnknownKeyError(f"unknown configuration key {key!r}")
            merged[key] = value
    profile = str(merged.get("profile", "paper"))
    if profile not in PROFILES:
        raise RangeError(f"profile: must be one of {sorted(PROFILES)} (got {profile!r})")
    values = dict(PROFILES[profile])
    values.update({k: _coerce(k, v) for k, v in merged.items()})
    values["profile"] = profile
    return validate(replace(RunConfig(), **values))


def to_dict(cfg):
    return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(cfg).items()}
