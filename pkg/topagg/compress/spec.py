"""
Compression specs: a tagged union selecting one compressor and its parameters.
"""

from dataclasses import asdict, dataclass
from typing import Any, ClassVar, Dict, Mapping, Optional, Type, Union

import numpy as np

from topagg.compress.klevel import sto_klevel
from topagg.compress.normtopk import norm_top_k
from topagg.compress.sign import topk_sto_sign
from topagg.compress.sketch import CountSketch, sketch
from topagg.core.gradient import clip_l2
from topagg.core.types import DenseGradient, KLevelGradient, SparseSignGradient, VectorLike, as_dense
from topagg.exceptions import ConfigurationError, ParameterError


def _positive(name: str, value: float) -> None:
    if not value > 0:
        raise ParameterError(f"{name} must be positive, got {value}")


@dataclass(frozen=True)
class TopKStoSign:
    kind: ClassVar[str] = "topk_sto_sign"

    k: int
    c: float

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ParameterError(f"k must be >= 1, got {self.k}")
        _positive("c", self.c)


@dataclass(frozen=True)
class NormTopK:
    kind: ClassVar[str] = "norm_top_k"

    k: float
    C: float

    def __post_init__(self) -> None:
        if not 0.0 < self.k <= 1.0:
            raise ParameterError(f"NormTopK fraction must be in (0, 1], got {self.k}")
        _positive("C", self.C)


@dataclass(frozen=True)
class KLevel:
    kind: ClassVar[str] = "klevel"

    m: int
    c: float
    rotation_seed: Optional[int] = None

    def __post_init__(self) -> None:
        if self.m < 2:
            raise ParameterError(f"k-level quantization needs m >= 2, got {self.m}")
        _positive("c", self.c)


@dataclass(frozen=True)
class Sketch:
    kind: ClassVar[str] = "sketch"

    rows: int
    width: int
    k: int
    c: float
    seed: int = 0

    def __post_init__(self) -> None:
        if self.rows < 1 or self.width < 1:
            raise ParameterError(f"sketch shape must be positive, got {self.rows} x {self.width}")
        if self.k < 1:
            raise ParameterError(f"k must be >= 1, got {self.k}")
        _positive("c", self.c)

    def new_sketch(self, dim: int) -> CountSketch:
        return CountSketch(self.rows, self.width, dim, self.seed)


CompressionSpec = Union[TopKStoSign, NormTopK, KLevel, Sketch]
Compressed = Union[SparseSignGradient, DenseGradient, KLevelGradient, CountSketch]

SPEC_KINDS: Dict[str, Type[Any]] = {cls.kind: cls for cls in (TopKStoSign, NormTopK, KLevel, Sketch)}


def spec_from_mapping(data: Mapping[str, Any]) -> CompressionSpec:
    """
    Builds a spec from a config mapping with a ``kind`` tag.

    Raises:
        ConfigurationError: On an unknown kind or unknown/missing fields
    """
    fields = dict(data)
    kind = fields.pop("kind", None)
    if kind not in SPEC_KINDS:
        raise ConfigurationError(f"unknown compression kind {kind!r}; expected one of {sorted(SPEC_KINDS)}")
    try:
        spec: CompressionSpec = SPEC_KINDS[kind](**fields)
    except TypeError as e:
        raise ConfigurationError(f"bad fields for compression kind {kind!r}: {e}")
    return spec


def spec_to_mapping(spec: CompressionSpec) -> Dict[str, Any]:
    return {"kind": spec.kind, **asdict(spec)}


def compress(g: VectorLike, spec: CompressionSpec, rng: np.random.Generator) -> Compressed:
    """
    Applies the compressor selected by ``spec`` to one gradient.

    Args:
        g: Teacher or worker gradient
        spec: Compressor and parameters
        rng: Random stream (unused by NormTopK, which clips to C before selecting)

    Returns:
        The compressed gradient; a fresh single-gradient sketch for :class:`Sketch`
    """
    arr = as_dense(g)
    if isinstance(spec, TopKStoSign):
        return topk_sto_sign(arr, spec.c, spec.k, rng)
    if isinstance(spec, NormTopK):
        return norm_top_k(clip_l2(arr, spec.C), spec.k)
    if isinstance(spec, KLevel):
        return sto_klevel(arr, spec.c, spec.m, spec.rotation_seed, rng)
    if isinstance(spec, Sketch):
        return sketch(topk_sto_sign(arr, spec.c, spec.k, rng), spec.new_sketch(arr.size))
    raise ConfigurationError(f"unsupported compression spec {spec!r}")
