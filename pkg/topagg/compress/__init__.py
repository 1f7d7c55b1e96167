"""
Gradient compressors: top-k stochastic sign, NormTopK, k-level quantization and count sketch.
"""

from topagg.compress.klevel import sto_klevel
from topagg.compress.normtopk import norm_top_k
from topagg.compress.sign import topk_sto_sign
from topagg.compress.sketch import CountSketch, sketch, unsketch
from topagg.compress.spec import CompressionSpec, KLevel, NormTopK, Sketch, TopKStoSign, compress

__all__ = [
    "CompressionSpec",
    "CountSketch",
    "KLevel",
    "NormTopK",
    "Sketch",
    "TopKStoSign",
    "compress",
    "norm_top_k",
    "sketch",
    "sto_klevel",
    "topk_sto_sign",
    "unsketch",
]
