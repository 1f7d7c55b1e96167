"""
Tests for gradient types, clipping and top-k helpers, seeded streams and dump formats.
"""

from itertools import combinations

import numpy as np
import pytest

from topagg.core.codec import decode_dense, decode_sparse, decode_ternary, encode_dense, encode_sparse, encode_ternary
from topagg.core.gradient import clip_coordinates, clip_l2, linf_normalize, magnitude_order, top_k_indices, top_k_sparsify
from topagg.core.rng import derive_seed, draw_seed, make_rng, mix64, substream
from topagg.core.types import KLevelGradient, SparseSignGradient, as_dense, as_ternary
from topagg.exceptions import DimensionMismatchError, ParameterError, ValidationError


class TestAsDense:
    def test_rejects_non_finite(self):
        with pytest.raises(ValidationError):
            as_dense([1.0, float("nan")])
        with pytest.raises(ValidationError):
            as_dense([float("inf")])

    def test_rejects_empty_and_matrix(self):
        with pytest.raises(ValidationError):
            as_dense([])
        with pytest.raises(ValidationError):
            as_dense([[1.0, 2.0]])

    def test_copies_input(self):
        src = np.array([1.0, 2.0])
        out = as_dense(src)
        out[0] = 9.0
        assert src[0] == 1.0

    def test_ternary_alphabet(self):
        assert as_ternary([1, 0, -1]).dtype == np.int8
        with pytest.raises(ValidationError):
            as_ternary([2, 0])


class TestSparseSignGradient:
    def test_to_dense(self):
        g = SparseSignGradient(dim=5, indices=np.array([1, 3]), signs=np.array([1, -1]))
        assert g.to_dense().tolist() == [0, 1, 0, -1, 0]
        assert len(g) == 2
        assert not g.abstained

    def test_abstained(self):
        g = SparseSignGradient(dim=3, indices=np.zeros(0, dtype=np.int64), signs=np.zeros(0, dtype=np.int8))
        assert g.abstained
        assert g.to_dense().tolist() == [0, 0, 0]

    @pytest.mark.parametrize(
        "indices,signs",
        [([2, 1], [1, 1]), ([0, 5], [1, 1]), ([0], [0]), ([0, 1], [1])],
    )
    def test_invalid_entries(self, indices, signs):
        with pytest.raises(ValidationError):
            SparseSignGradient(dim=5, indices=np.array(indices), signs=np.array(signs))


class TestKLevelGradient:
    def test_values_on_grid(self):
        q = KLevelGradient(levels=3, codes=np.array([0, 1, 2]), dim=3, source_dim=3)
        assert q.values.tolist() == [-1.0, 0.0, 1.0]

    def test_code_length_must_match(self):
        with pytest.raises(DimensionMismatchError):
            KLevelGradient(levels=2, codes=np.array([0, 1]), dim=3, source_dim=3)

    def test_codes_out_of_range(self):
        with pytest.raises(ValidationError):
            KLevelGradient(levels=2, codes=np.array([0, 2]), dim=2, source_dim=2)


class TestClipping:
    def test_clip_coordinates(self):
        assert clip_coordinates([3.0, -0.5, -7.0], 1.0).tolist() == [1.0, -0.5, -1.0]

    def test_clip_coordinates_needs_positive_c(self):
        with pytest.raises(ParameterError):
            clip_coordinates([1.0], 0.0)

    def test_clip_l2_scales_down(self):
        out = clip_l2([3.0, 4.0], 1.0)
        assert np.allclose(out, [0.6, 0.8])

    def test_clip_l2_leaves_small_vectors(self):
        g = np.array([0.3, 0.4])
        assert np.array_equal(clip_l2(g, 1.0), g)

    def test_linf_normalize(self):
        assert linf_normalize([2.0, -4.0]).tolist() == [0.5, -1.0]
        assert linf_normalize([0.0, 0.0]).tolist() == [0.0, 0.0]


class TestTopK:
    def test_indices_sorted_ascending(self):
        assert top_k_indices([0.1, -5.0, 3.0, 0.2], 2).tolist() == [1, 2]

    def test_ties_prefer_lower_index(self):
        assert top_k_indices([1.0, -1.0, 1.0], 2).tolist() == [0, 1]
        assert magnitude_order(np.array([2.0, 2.0, 3.0])).tolist() == [2, 0, 1]

    def test_k_out_of_range(self):
        with pytest.raises(ParameterError):
            top_k_indices([1.0, 2.0], 3)
        with pytest.raises(ParameterError):
            top_k_indices([1.0, 2.0], 0)

    def test_sparsify(self):
        assert top_k_sparsify([3.0, -4.0, 1.0], 1).tolist() == [0.0, -4.0, 0.0]

    @pytest.mark.parametrize("d", [1, 3, 6, 8, 10])
    @pytest.mark.parametrize("ties", [False, True])
    def test_selection_maximizes_kept_magnitude(self, d, ties):
        gen = make_rng(d)
        g = gen.integers(-2, 3, size=d).astype(float) if ties else gen.normal(size=d)
        for k in range(1, d + 1):
            best = max(np.abs(g[list(subset)]).sum() for subset in combinations(range(d), k))
            assert np.abs(g[top_k_indices(g, k)]).sum() == pytest.approx(best)


class TestSeededStreams:
    def test_mix64_known_value(self):
        # First output of splitmix64 seeded with 0.
        assert mix64(0) == 0xE220A8397B1DCDAF

    def test_derive_seed_depends_on_path(self):
        assert derive_seed(7, 1) == derive_seed(7, 1)
        assert derive_seed(7, 1) != derive_seed(7, 2)
        assert derive_seed(7, 1, 2) != derive_seed(7, 2, 1)

    def test_substreams_reproducible(self):
        a = substream(42, 3).normal(size=5)
        b = substream(42, 3).normal(size=5)
        c = substream(42, 4).normal(size=5)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_draw_seed_consumes_stream(self, rng):
        assert draw_seed(rng) != draw_seed(rng)


class TestCodec:
    def test_dense_layout(self):
        data = encode_dense([1.5, -2.0])
        assert data[:4] == b"DLG1"
        assert len(data) == 4 + 1 + 4 + 16
        assert decode_dense(data).tolist() == [1.5, -2.0]

    def test_sparse_layout(self):
        g = SparseSignGradient(dim=10, indices=np.array([2, 7]), signs=np.array([-1, 1]))
        data = encode_sparse(g)
        assert len(data) == 4 + 8 + 2 * 5
        back = decode_sparse(data)
        assert back.dim == 10
        assert back.indices.tolist() == [2, 7]
        assert back.signs.tolist() == [-1, 1]

    def test_ternary_packing(self):
        data = encode_ternary([1, -1, 0, 1, -1])
        # 01 | 10 << 2 | 00 << 4 | 01 << 6, then 10
        assert data[8:] == bytes([0b01001001, 0b10])
        assert decode_ternary(data).tolist() == [1, -1, 0, 1, -1]

    def test_bad_magic(self):
        with pytest.raises(ValidationError):
            decode_dense(b"XXXX" + b"\x00" * 5)

    def test_reserved_ternary_code(self):
        with pytest.raises(ValidationError):
            decode_ternary(b"DLT1" + (1).to_bytes(4, "little") + bytes([0b11]))
