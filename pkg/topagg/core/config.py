"""
Experiment configuration: loading, presets and schema validation.

A config file is YAML (``.yaml``/``.yml``) or JSON with one section per
harness: ``pate``, ``dpsgd``, ``convergence`` and ``compress_bench``. Each
section maps onto a frozen dataclass; unknown keys and out-of-range values raise
:class:`~topagg.exceptions.ConfigurationError`.
"""

import copy
import dataclasses
import json
import logging
import os
import typing
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional, Tuple, Type, TypeVar, cast

import yaml

from topagg.aggregate import AggregationParams
from topagg.exceptions import ConfigurationError, ParameterError

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "TOPAGG_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "topagg-results"

SECTIONS = ("pate", "dpsgd", "convergence", "compress_bench")
SCENARIOS = ("ClippedSGD", "TopK_SGD", "TopK_GM_DP", "TopAgg_SGD", "GM_DP")

C = TypeVar("C")


def default_output_dir() -> str:
    """Output directory from ``TOPAGG_OUTPUT_DIR``, falling back to ./topagg-results."""
    return os.environ.get(OUTPUT_DIR_ENV, DEFAULT_OUTPUT_DIR)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigurationError(message)


@dataclass(frozen=True)
class PateConfig:
    """
    PATE training of synthetic records (``pate`` section).

    ``dataset_size`` counts the private records plus the ``holdout`` records kept
    back for the probe classifier; the private part must split evenly among the
    teachers.
    """

    teachers: int = 100
    k: int = 1
    sigma: float = 80.0
    beta: float = 0.5
    clip_c: float = 1.0
    epsilon_target: float = 1.0
    delta: float = 1e-5
    seed: int = 0
    dataset: str = "two_clusters"
    dim: int = 2
    dataset_size: int = 2400
    holdout: int = 400
    mode: str = "record"
    batch_size: int = 20
    iterations: int = 10
    hidden: int = 16
    teacher_lr: float = 0.1
    teacher_batch: int = 8
    student_lr: float = 0.3
    teacher_update: str = "per_record"
    data_dependent: bool = True
    use_top_k: bool = True
    stochastic: bool = True
    threshold: bool = True
    latent_dim: int = 4
    generator_hidden: int = 0
    generator_lr: float = 0.05
    generator_steps: int = 50

    def __post_init__(self) -> None:
        _require(self.teachers >= 1, "pate.teachers must be >= 1")
        _require(self.k >= 1, "pate.k must be >= 1")
        _require(self.sigma > 0, "pate.sigma must be positive")
        _require(0.0 < self.beta <= 1.0, "pate.beta must be in (0, 1]")
        _require(self.clip_c > 0, "pate.clip_c must be positive")
        _require(self.epsilon_target > 0, "pate.epsilon_target must be positive")
        _require(0.0 < self.delta < 1.0, "pate.delta must be in (0, 1)")
        _require(self.dataset in ("two_clusters", "digits"), "pate.dataset must be two_clusters or digits")
        _require(self.dim >= 1, "pate.dim must be >= 1")
        _require(0 < self.holdout < self.dataset_size, "pate.holdout must be in (0, dataset_size)")
        _require(
            (self.dataset_size - self.holdout) % self.teachers == 0,
            f"pate: {self.teachers} teachers do not divide {self.dataset_size - self.holdout} private records",
        )
        _require(self.mode in ("record", "generator"), "pate.mode must be record or generator")
        _require(self.teacher_update in ("per_record", "per_batch"), "pate.teacher_update must be per_record or per_batch")
        _require(self.batch_size >= 1 and self.iterations >= 0, "pate.batch_size must be >= 1 and pate.iterations >= 0")
        _require(self.teacher_lr >= 0 and self.student_lr > 0, "pate learning rates must be positive")
        _require(self.teacher_batch >= 1, "pate.teacher_batch must be >= 1")
        _require(self.generator_steps >= 0 and self.generator_lr > 0, "pate generator settings out of range")

    @property
    def data_dim(self) -> int:
        return 64 if self.dataset == "digits" else self.dim

    def aggregation(self) -> AggregationParams:
        """The aggregation parameters of every round."""
        try:
            return AggregationParams(
                teachers=self.teachers,
                sigma=self.sigma,
                beta=self.beta,
                k=self.k,
                c=self.clip_c,
                use_top_k=self.use_top_k,
                stochastic=self.stochastic,
                threshold=self.threshold,
            )
        except ParameterError as e:
            raise ConfigurationError(str(e))


@dataclass(frozen=True)
class SgdConfig:
    """
    DP-SGD with NormTopK (``dpsgd`` section).

    ``sigma`` is the noise multiplier; ``batch_size`` is the expected Poisson batch size.
    """

    batch_size: int = 50
    lr: float = 0.5
    sigma: float = 1.0
    clip_norm: float = 1.0
    topk_fraction: float = 0.5
    epochs: int = 5
    delta: float = 1e-5
    seed: int = 0
    scenarios: Tuple[str, ...] = SCENARIOS
    task: str = "logistic"
    samples: int = 500
    dim: int = 20
    hidden: int = 8
    seeds: int = 10

    def __post_init__(self) -> None:
        _require(1 <= self.batch_size <= self.samples, "dpsgd.batch_size must be in [1, samples]")
        _require(self.lr > 0, "dpsgd.lr must be positive")
        _require(self.sigma >= 0, "dpsgd.sigma must be >= 0")
        _require(self.clip_norm > 0, "dpsgd.clip_norm must be positive")
        _require(0.0 < self.topk_fraction <= 1.0, "dpsgd.topk_fraction must be in (0, 1]")
        _require(self.epochs >= 1, "dpsgd.epochs must be >= 1")
        _require(0.0 < self.delta < 1.0, "dpsgd.delta must be in (0, 1)")
        _require(all(s in SCENARIOS for s in self.scenarios), f"dpsgd.scenarios must be drawn from {SCENARIOS}")
        _require(self.task in ("logistic", "mlp"), "dpsgd.task must be logistic or mlp")
        _require(self.dim >= 1 and self.hidden >= 1 and self.seeds >= 1, "dpsgd sizes must be positive")

    @property
    def sampling_rate(self) -> float:
        return self.batch_size / self.samples

    @property
    def steps(self) -> int:
        """Number of DP-SGD steps: epochs * n / B."""
        return self.epochs * (self.samples // self.batch_size)


@dataclass(frozen=True)
class ConvergenceConfig:
    """Update-rule runs for the convergence bound (``convergence`` section)."""

    objective: str = "quadratic"
    workers: int = 8
    dim: int = 50
    samples_per_worker: int = 20
    gamma: float = 0.05
    c: float = 1.0
    k: int = 50
    noise_scale: float = 0.01
    quantize: bool = True
    iterations: int = 200
    seed: int = 0
    seeds: int = 20
    heterogeneity: float = 0.5
    k_sweep: Tuple[int, ...] = ()
    weibull_rho1: float = 1.0
    weibull_rho2: float = 0.5
    weibull_trials: int = 100

    def __post_init__(self) -> None:
        _require(self.objective in ("quadratic", "logistic"), "convergence.objective must be quadratic or logistic")
        _require(self.workers >= 1 and self.dim >= 1 and self.samples_per_worker >= 1, "convergence sizes must be positive")
        _require(self.gamma > 0 and self.c > 0, "convergence.gamma and convergence.c must be positive")
        _require(1 <= self.k <= self.dim, "convergence.k must be in [1, dim]")
        _require(self.noise_scale >= 0, "convergence.noise_scale must be >= 0")
        _require(self.iterations >= 1 and self.seeds >= 1, "convergence.iterations and seeds must be >= 1")
        _require(all(1 <= k <= self.dim for k in self.k_sweep), "convergence.k_sweep values must be in [1, dim]")
        _require(self.weibull_rho1 > 0 and 0.0 < self.weibull_rho2 < 1.0, "convergence.weibull_rho1 must be positive and weibull_rho2 in (0, 1)")
        _require(self.weibull_trials >= 1, "convergence.weibull_trials must be >= 1")


@dataclass(frozen=True)
class BenchConfig:
    """Compressor comparison on synthetic teacher gradients (``compress_bench`` section)."""

    teachers: int = 50
    dim: int = 256
    k: int = 16
    c: float = 1.0
    sigma: float = 5.0
    beta: float = 0.1
    levels: int = 2
    rotation_seed: int = 7
    sketch_rows: int = 5
    sketch_width: int = 128
    trials: int = 5
    seed: int = 0
    signal: float = 1.0
    spread: float = 1.0

    def __post_init__(self) -> None:
        _require(self.teachers >= 1 and self.dim >= 1, "compress_bench sizes must be positive")
        _require(1 <= self.k <= self.dim, "compress_bench.k must be in [1, dim]")
        _require(self.c > 0 and self.sigma >= 0, "compress_bench.c must be positive and sigma >= 0")
        _require(0.0 < self.beta <= 1.0, "compress_bench.beta must be in (0, 1]")
        _require(self.levels >= 2, "compress_bench.levels must be >= 2")
        _require(self.sketch_rows >= 1 and self.sketch_width >= 1 and self.trials >= 1, "compress_bench sketch shape and trials must be positive")


SECTION_TYPES: Dict[str, Type[Any]] = {
    "pate": PateConfig,
    "dpsgd": SgdConfig,
    "convergence": ConvergenceConfig,
    "compress_bench": BenchConfig,
}

_FULL_SCALE: Dict[str, Any] = {"dataset": "two_clusters", "dim": 784, "dataset_size": 8400, "holdout": 400, "batch_size": 64}

# Hyperparameters reported for full-scale runs (provenance; not desk-runnable),
# and the scaled desk presets used by default.
PRESETS: Dict[str, Dict[str, Dict[str, Any]]] = {
    "mnist-eps1": {"pate": {**_FULL_SCALE, "sigma": 5000.0, "teachers": 4000, "k": 200, "beta": 0.7, "clip_c": 1e-5, "epsilon_target": 1.0, "delta": 1e-5}},
    "mnist-eps10": {"pate": {**_FULL_SCALE, "sigma": 900.0, "teachers": 4000, "k": 200, "beta": 0.7, "clip_c": 1e-5, "epsilon_target": 10.0, "delta": 1e-5}},
    "celeba-eps1": {"pate": {**_FULL_SCALE, "sigma": 9000.0, "teachers": 4000, "k": 200, "beta": 0.7, "clip_c": 1e-5, "epsilon_target": 1.0, "delta": 1e-5}},
    "celeba-eps10": {"pate": {**_FULL_SCALE, "sigma": 700.0, "teachers": 4000, "k": 200, "beta": 0.7, "clip_c": 1e-5, "epsilon_target": 10.0, "delta": 1e-5}},
    "toy-2d": {
        "pate": {"dataset": "two_clusters", "dim": 2, "teachers": 100, "k": 1, "sigma": 80.0, "beta": 0.5, "clip_c": 1.0},
        "dpsgd": {},
        "convergence": {"k_sweep": [50, 25, 5]},
        "compress_bench": {},
    },
    "toy-digits": {
        "pate": {
            "dataset": "digits",
            "teachers": 50,
            "k": 8,
            "sigma": 40.0,
            "beta": 0.5,
            "clip_c": 1.0,
            "dataset_size": 1400,
            "holdout": 400,
            "batch_size": 8,
            "iterations": 5,
            "student_lr": 0.1,
        },
    },
}
DEFAULT_PRESET = "toy-2d"


def load_config(path: str) -> Dict[str, Any]:
    """
    Loads a configuration file; the extension picks YAML or JSON.

    Args:
        path: Path to a ``.yaml``, ``.yml`` or ``.json`` file

    Returns:
        The raw mapping

    Raises:
        ConfigurationError: If the file cannot be read or parsed
    """
    try:
        with open(path, "r") as f:
            if path.endswith(".yaml") or path.endswith(".yml"):
                data = yaml.safe_load(f)
            else:
                data = json.load(f)
    except (OSError, ValueError, yaml.YAMLError) as e:
        raise ConfigurationError(f"Error loading config file {path}: {e}")
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"config file {path} must hold a mapping of sections")
    return cast(Dict[str, Any], data)


def _coerce(value: Any, annotation: Any, where: str) -> Any:
    origin = typing.get_origin(annotation)
    if origin is tuple:
        item = typing.get_args(annotation)[0]
        if not isinstance(value, (list, tuple)):
            raise ConfigurationError(f"{where} must be a list")
        return tuple(_coerce(v, item, where) for v in value)
    if annotation is bool:
        if not isinstance(value, bool):
            raise ConfigurationError(f"{where} must be true or false, got {value!r}")
        return value
    if annotation is int:
        if isinstance(value, bool):
            raise ConfigurationError(f"{where} must be an integer, got {value!r}")
        try:
            number = float(value)
        except (TypeError, ValueError):
            raise ConfigurationError(f"{where} must be an integer, got {value!r}")
        if not number.is_integer():
            raise ConfigurationError(f"{where} must be an integer, got {value!r}")
        return int(number)
    if annotation is float:
        if isinstance(value, bool):
            raise ConfigurationError(f"{where} must be a number, got {value!r}")
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigurationError(f"{where} must be a number, got {value!r}")
    if annotation is str:
        if not isinstance(value, str):
            raise ConfigurationError(f"{where} must be a string, got {value!r}")
        return value
    return value


def section_from_mapping(cls: Type[C], data: Optional[Mapping[str, Any]], section: str) -> C:
    """
    Builds a config dataclass from a section mapping.

    Raises:
        ConfigurationError: On unknown keys, wrong types or invalid values
    """
    data = dict(data or {})
    known = {f.name: f for f in dataclasses.fields(cast(Any, cls))}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigurationError(f"unknown keys in section '{section}': {', '.join(unknown)}")
    hints = typing.get_type_hints(cls)
    kwargs = {name: _coerce(value, hints[name], f"{section}.{name}") for name, value in data.items()}
    return cls(**kwargs)


def resolve_config(raw: Optional[Mapping[str, Any]] = None, preset: Optional[str] = None) -> Dict[str, Dict[str, Any]]:
    """
    Merges a preset and a raw config into one mapping per section.

    Values in ``raw`` override the preset; a top-level ``preset`` key in ``raw``
    selects the preset when none is passed.
    """
    raw = dict(raw or {})
    name = preset or raw.pop("preset", None) or DEFAULT_PRESET
    raw.pop("preset", None)
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}")
    unknown = sorted(set(raw) - set(SECTIONS))
    if unknown:
        raise ConfigurationError(f"unknown config sections: {', '.join(unknown)}")
    merged: Dict[str, Dict[str, Any]] = {}
    for section in SECTIONS:
        values = copy.deepcopy(PRESETS[name].get(section, {}))
        override = raw.get(section) or {}
        if not isinstance(override, dict):
            raise ConfigurationError(f"section '{section}' must be a mapping")
        values.update(override)
        merged[section] = values
    return merged


def build_section(resolved: Mapping[str, Mapping[str, Any]], section: str) -> Any:
    """Validated dataclass for one section of a resolved config."""
    if section not in SECTION_TYPES:
        raise ConfigurationError(f"unknown config section {section!r}")
    return section_from_mapping(SECTION_TYPES[section], resolved.get(section), section)


def config_to_mapping(config: Any) -> Dict[str, Any]:
    """Plain mapping of a config dataclass (tuples become lists)."""
    return {k: list(v) if isinstance(v, tuple) else v for k, v in dataclasses.asdict(config).items()}
