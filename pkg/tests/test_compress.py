"""
Tests for the gradient compressors and the aggregator benchmark.
"""

from itertools import product

import numpy as np
import pytest

from topagg.compress.bench import BenchRow, cosine_similarity, run_bench, sign_agreement, summarize
from topagg.compress.klevel import fwht, inverse_rotate, klevel_decode, padded_dim, rotate, rotate_and_normalize, sto_klevel
from topagg.compress.normtopk import norm_top_k, norm_top_k_support
from topagg.compress.sign import sign_probabilities, topk_sto_sign
from topagg.compress.sketch import CountSketch, sketch, unsketch
from topagg.compress.spec import KLevel, NormTopK, Sketch, TopKStoSign, compress, spec_from_mapping, spec_to_mapping
from topagg.core.config import BenchConfig
from topagg.core.gradient import magnitude_order
from topagg.core.rng import make_rng
from topagg.core.types import KLevelGradient, SparseSignGradient
from topagg.exceptions import ConfigurationError, DimensionMismatchError, ParameterError


class TestTopKStoSign:
    def test_probabilities_use_clipped_normalized_gradient(self):
        support, prob = sign_probabilities([0.5, -2.0, 0.1], c=1.0, k=2)
        assert support.tolist() == [0, 1]
        assert np.allclose(prob, [0.75, 0.0])

    def test_at_most_k_votes_on_top_k_support(self, rng):
        g = rng.normal(size=50)
        vote = topk_sto_sign(g, 1.0, 7, rng)
        assert len(vote) == 7
        assert set(vote.indices.tolist()) == set(np.argsort(-np.abs(g))[:7].tolist())

    def test_zero_gradient_abstains(self, rng):
        assert topk_sto_sign(np.zeros(5), 1.0, 2, rng).abstained

    def test_k_exceeding_dimension(self, rng):
        with pytest.raises(ParameterError):
            topk_sto_sign([1.0, 2.0], 1.0, 3, rng)

    def test_vote_is_unbiased_for_normalized_gradient(self):
        g = np.array([0.2, -0.6, 1.0])
        gen = make_rng(3)
        draws = np.stack([topk_sto_sign(g, 1.0, 3, gen).to_dense() for _ in range(4000)])
        assert np.allclose(draws.mean(axis=0), g, atol=0.05)

    def test_deterministic_sign(self, rng):
        vote = topk_sto_sign([0.3, -0.9, 0.0], 1.0, 2, rng, stochastic=False)
        assert vote.to_dense().tolist() == [1, -1, 0]


class TestNormTopK:
    def test_keeps_energy_prefix(self):
        assert norm_top_k([3.0, 4.0], 0.64).tolist() == [0.0, 4.0]

    def test_may_keep_nothing(self):
        assert norm_top_k([3.0, 4.0], 0.5).tolist() == [0.0, 0.0]

    def test_full_fraction_is_identity(self):
        g = np.array([1.0, -2.0, 0.5])
        assert np.array_equal(norm_top_k(g, 1.0), g)

    def test_energy_bound(self, rng):
        for k in (0.1, 0.3, 0.7, 0.95):
            g = rng.normal(size=40)
            out = norm_top_k(g, k)
            assert out @ out <= k * (g @ g) + 1e-12

    def test_support_is_magnitude_prefix(self):
        support = norm_top_k_support([1.0, -5.0, 2.0, 0.1], 0.99)
        assert support.tolist() == [1, 2, 0]

    @pytest.mark.parametrize("d", range(1, 13))
    def test_support_is_longest_prefix_within_target(self, d):
        gen = make_rng(100 + d)
        for _ in range(25):
            g = gen.integers(-3, 4, size=d).astype(float)
            k = float(gen.uniform(0.05, 0.999))
            order = sorted(range(d), key=lambda j: (-abs(g[j]), j))
            target = k * float(g @ g)
            within = [m for m in range(d + 1) if sum(g[j] ** 2 for j in order[:m]) <= target]
            assert norm_top_k_support(g, k).tolist() == order[: max(within)]

    def test_support_over_every_small_vector(self):
        for d in range(1, 6):
            for values in product((0.0, 1.0, -2.0, 3.0), repeat=d):
                g = np.array(values)
                for k in (0.25, 0.5, 0.9):
                    support = norm_top_k_support(g, k)
                    kept = g[support]
                    assert kept @ kept <= k * (g @ g)
                    assert support.tolist() == magnitude_order(g)[: support.size].tolist()
                    if support.size < d:
                        nxt = magnitude_order(g)[support.size]
                        assert kept @ kept + g[nxt] ** 2 > k * (g @ g)

    @pytest.mark.parametrize("k", [0.0, 1.5, -0.2])
    def test_fraction_out_of_range(self, k):
        with pytest.raises(ParameterError):
            norm_top_k([1.0], k)


class TestKLevel:
    def test_padded_dim(self):
        assert [padded_dim(d) for d in (1, 2, 3, 5, 8, 9)] == [1, 2, 4, 8, 8, 16]

    def test_fwht_of_unit_vector(self):
        assert fwht([1.0, 0.0, 0.0, 0.0]).tolist() == [1.0, 1.0, 1.0, 1.0]

    def test_fwht_needs_power_of_two(self):
        with pytest.raises(ParameterError):
            fwht([1.0, 2.0, 3.0])

    def test_rotation_is_orthonormal(self, rng):
        g = rng.normal(size=13)
        y = rotate(g, 11)
        assert y.size == 16
        assert np.isclose(np.linalg.norm(y), np.linalg.norm(g))
        assert np.allclose(inverse_rotate(y, 11, 13), g)

    def test_codes_are_unbiased(self):
        g = np.array([0.3, -0.7, 1.0, 0.0])
        expected = rotate_and_normalize(g, 1.0)
        gen = make_rng(5)
        values = np.stack([sto_klevel(g, 1.0, 3, None, gen).values for _ in range(4000)])
        assert np.allclose(values.mean(axis=0), expected, atol=0.05)

    def test_values_stay_on_grid(self, rng):
        q = sto_klevel(rng.normal(size=10), 0.5, 5, 2, rng)
        assert q.dim == 16
        assert q.source_dim == 10
        assert set(np.round(q.values, 6)).issubset({-1.0, -0.5, 0.0, 0.5, 1.0})

    def test_decode_maps_back_to_source_dimension(self, rng):
        q = sto_klevel(rng.normal(size=10), 1.0, 2, 4, rng)
        assert klevel_decode(q).size == 10
        assert klevel_decode(q, derotate=False).size == 16

    def test_zero_gradient_abstains(self, rng):
        q = sto_klevel(np.zeros(4), 1.0, 2, None, rng)
        assert q.abstained
        assert q.values.tolist() == [0.0] * 4

    def test_needs_two_levels(self, rng):
        with pytest.raises(ParameterError):
            sto_klevel([1.0], 1.0, 1, None, rng)


class TestCountSketch:
    def test_linear(self, rng):
        a, b = rng.normal(size=30), rng.normal(size=30)
        cs_a = sketch(a, CountSketch(3, 8, 30, seed=1))
        cs_b = sketch(b, CountSketch(3, 8, 30, seed=1))
        cs_sum = sketch(a + b, CountSketch(3, 8, 30, seed=1))
        assert np.allclose((cs_a + cs_b).table, cs_sum.table)

    def test_recovers_single_coordinate(self):
        g = np.zeros(20)
        g[7] = -3.0
        assert unsketch(sketch(g, CountSketch(5, 16, 20, seed=2)), 20)[7] == -3.0

    def test_sparse_votes_match_dense(self):
        vote = SparseSignGradient(dim=10, indices=np.array([1, 4]), signs=np.array([1, -1]))
        sparse = sketch(vote, CountSketch(2, 4, 10, seed=0))
        dense = sketch(vote.to_dense().astype(float), CountSketch(2, 4, 10, seed=0))
        assert np.array_equal(sparse.table, dense.table)

    def test_incompatible_sketches(self):
        with pytest.raises(DimensionMismatchError):
            CountSketch(2, 4, 10, seed=0).merge(CountSketch(2, 4, 10, seed=1))
        with pytest.raises(DimensionMismatchError):
            unsketch(CountSketch(2, 4, 10, seed=0), 11)

    @pytest.mark.slow
    def test_recovers_heavy_coordinates(self):
        dim, heavy = 10_000, 10
        recovered = 0
        for trial in range(100):
            gen = make_rng(trial)
            g = gen.normal(size=dim)
            hot = gen.choice(dim, size=heavy, replace=False)
            g[hot] = gen.choice([-1.0, 1.0], size=heavy) * 50.0
            estimate = unsketch(sketch(g, CountSketch(5, 2048, dim, seed=trial)), dim)
            accurate = np.all(np.abs(estimate[hot] - g[hot]) <= 10.0)
            ranked = set(np.argsort(-np.abs(estimate))[: 2 * heavy].tolist())
            recovered += bool(accurate and ranked.issuperset(hot.tolist()))
        assert recovered >= 99


class TestCompressionSpec:
    def test_from_mapping(self):
        spec = spec_from_mapping({"kind": "klevel", "m": 4, "c": 0.5})
        assert spec == KLevel(m=4, c=0.5)
        assert spec_to_mapping(spec) == {"kind": "klevel", "m": 4, "c": 0.5, "rotation_seed": None}

    def test_unknown_kind(self):
        with pytest.raises(ConfigurationError):
            spec_from_mapping({"kind": "quantum"})

    def test_unknown_field(self):
        with pytest.raises(ConfigurationError):
            spec_from_mapping({"kind": "norm_top_k", "k": 0.5, "C": 1.0, "extra": 1})

    def test_invalid_parameters(self):
        with pytest.raises(ParameterError):
            TopKStoSign(k=0, c=1.0)
        with pytest.raises(ParameterError):
            Sketch(rows=0, width=4, k=1, c=1.0)

    def test_dispatch(self, rng):
        g = rng.normal(size=8)
        assert isinstance(compress(g, TopKStoSign(k=2, c=1.0), rng), SparseSignGradient)
        assert isinstance(compress(g, KLevel(m=2, c=1.0), rng), KLevelGradient)
        assert isinstance(compress(g, Sketch(rows=2, width=4, k=2, c=1.0), rng), CountSketch)
        clipped = compress(g * 100, NormTopK(k=1.0, C=1.0), rng)
        assert np.isclose(np.linalg.norm(clipped), 1.0)


class TestBench:
    def test_scores(self):
        assert cosine_similarity([1.0, 0.0], [2.0, 0.0]) == pytest.approx(1.0)
        assert cosine_similarity([0.0, 0.0], [1.0, 0.0]) == 0.0
        assert sign_agreement([1.0, 0.0, -1.0], [0.5, -3.0, 2.0]) == 0.5
        assert np.isnan(sign_agreement([0.0, 0.0], [1.0, 1.0]))

    def test_rows_do_not_depend_on_workers(self):
        config = BenchConfig(teachers=10, dim=32, k=4, trials=2, sketch_width=32, sigma=0.5)
        serial = run_bench(config, workers=1)
        threaded = run_bench(config, workers=3)
        assert len(serial) == 8
        assert [repr(r) for r in serial] == [repr(r) for r in threaded]

    def test_noiseless_tally_points_along_the_mean(self):
        config = BenchConfig(teachers=20, dim=32, k=4, trials=2, sketch_width=32, sigma=0.0)
        summary = summarize(run_bench(config))
        assert set(summary) == {"topagg", "topagg_no_threshold", "d2pfed", "fetchsgd"}
        assert summary["topagg_no_threshold"]["cosine"] > 0.0

    def test_summarize_skips_missing_methods(self):
        summary = summarize([BenchRow("topagg", 0, 0.5, 1.0, 3)])
        assert list(summary) == ["topagg"]
        assert summary["topagg"]["support"] == 3.0
