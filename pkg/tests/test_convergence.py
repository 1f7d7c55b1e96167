"""
Tests for the update rule, tau_k measurement and the convergence bound check.
"""

import json
from dataclasses import replace

import numpy as np
import pytest

from topagg.convergence.bound import compression_term, run_convergence, run_traces, tradeoff, verify_bound
from topagg.convergence.objectives import LogisticObjective, QuadraticObjective, make_objective
from topagg.convergence.tau import measure_tau_k, tau_curves, weibull_tau_profile
from topagg.convergence.update import Trace, run_trace, stochastic_sign, update_rule_step, worker_message
from topagg.core.config import ConvergenceConfig
from topagg.core.rng import make_rng
from topagg.exceptions import DimensionMismatchError, InvariantViolationError, ParameterError

EXACT = ConvergenceConfig(workers=1, dim=3, samples_per_worker=1, k=3, c=1e6, noise_scale=0.0, quantize=False, gamma=0.1, iterations=20, seeds=1)
SMALL = ConvergenceConfig(workers=4, dim=10, samples_per_worker=5, k=5, iterations=30, seeds=3)


class TestTau:
    def test_example(self):
        assert measure_tau_k([3.0, 4.0], 1) == pytest.approx(0.6)
        assert measure_tau_k([3.0, 4.0], 2) == 0.0
        assert measure_tau_k([0.0, 0.0], 1) == 0.0

    def test_curves(self):
        assert np.allclose(tau_curves([[3.0, 4.0]]), [[1.0, 0.6, 0.0]])
        assert np.allclose(tau_curves([[0.0, 0.0]]), [[0.0, 0.0, 0.0]])

    def test_curves_match_single_measurement(self, rng):
        g = rng.normal(size=12)
        curve = tau_curves(g)[0]
        assert np.allclose(curve[1:12], [measure_tau_k(g, k) for k in range(1, 12)])

    def test_weibull_profile(self):
        profile = weibull_tau_profile(1.0, 0.5, 200, trials=20, seed=3)
        assert profile.ks[0] == 1
        assert profile.ks[-1] == 200
        assert np.all(np.diff(profile.mean_tau) <= 1e-12)
        assert profile.mean_tau[-1] == 0.0
        assert np.all((profile.mean_tau >= 0.0) & (profile.mean_tau <= 1.0))
        assert profile.reference[-1] == pytest.approx(0.0, abs=1e-12)
        assert set(profile.to_dict()) == {"rho1", "rho2", "dim", "k", "mean_tau", "reference"}

    def test_heavier_tails_compress_better(self):
        heavy = weibull_tau_profile(1.0, 0.3, 100, trials=30, seed=1, ks=[10])
        light = weibull_tau_profile(1.0, 0.9, 100, trials=30, seed=1, ks=[10])
        assert heavy.mean_tau[0] < light.mean_tau[0]

    @pytest.mark.parametrize("rho1,rho2", [(0.0, 0.5), (1.0, 1.0), (1.0, 0.0)])
    def test_invalid_shape(self, rho1, rho2):
        with pytest.raises(ParameterError):
            weibull_tau_profile(rho1, rho2, 10, trials=1, seed=0)


class TestUpdateRule:
    def test_exact_gradient_descent(self):
        objective = QuadraticObjective(np.zeros((1, 1, 3)))
        x = update_rule_step(np.array([1.0, 2.0, 3.0]), objective, EXACT, make_rng(0))
        assert np.allclose(x, [0.9, 1.8, 2.7])

    def test_stochastic_sign_is_unbiased(self):
        v = np.array([0.25, -0.5, 1.0, 0.0])
        gen = make_rng(2)
        mean = np.mean([stochastic_sign(v, gen) for _ in range(5000)], axis=0)
        assert np.allclose(mean, v, atol=0.03)

    def test_worker_message_support(self, rng):
        config = replace(SMALL, noise_scale=0.0, k=3)
        message = worker_message(rng.normal(size=10), config, rng)
        assert np.count_nonzero(message) <= 3
        assert set(np.abs(message).tolist()).issubset({0.0, 1.0})

    def test_worker_message_noise(self):
        config = replace(SMALL, noise_scale=0.5, k=2, quantize=False)
        noise = worker_message(np.zeros(10), config, make_rng(4))
        samples = np.concatenate([worker_message(np.zeros(10), config, make_rng(s)) for s in range(400)])
        assert noise.size == 10
        assert np.var(samples) == pytest.approx(1.0, rel=0.1)

    def test_dimension_check(self):
        objective = QuadraticObjective(np.zeros((1, 1, 3)))
        with pytest.raises(DimensionMismatchError):
            update_rule_step(np.zeros(4), objective, EXACT, make_rng(0))

    def test_trace(self):
        objective = QuadraticObjective(np.ones((1, 1, 3)))
        trace = run_trace(objective, EXACT, seed=0)
        assert trace.iterations == 20
        assert len(trace.values) == 21
        assert trace.values == sorted(trace.values, reverse=True)
        assert np.allclose(trace.final, 1.0 - 0.9**20)
        assert trace.tau.shape == (4,)

    def test_sigma_measures_spread_across_workers(self):
        # one sample per worker: every within-worker spread is zero
        objective = QuadraticObjective(np.array([[[1.0, 1.0]], [[-1.0, -1.0]]]))
        config = ConvergenceConfig(workers=2, dim=2, samples_per_worker=1, k=2)
        trace = Trace(seed=0, k=2)
        trace.observe(np.zeros(2), objective, config)
        assert np.allclose(trace.sigma, [1.0, 1.0])

    def test_sigma_is_zero_for_exact_gradients(self):
        trace = run_trace(QuadraticObjective(np.ones((1, 1, 3))), EXACT, seed=0)
        assert np.allclose(trace.sigma, 0.0)


class TestObjectives:
    def test_quadratic_optimum(self, rng):
        objective = QuadraticObjective(rng.normal(size=(3, 4, 2)))
        assert np.allclose(objective.gradient(objective.optimum), 0.0)
        assert objective.lipschitz == 1.0

    def test_logistic_optimum(self):
        objective = make_objective(replace(SMALL, objective="logistic"), seed=5)
        assert isinstance(objective, LogisticObjective)
        assert np.linalg.norm(objective.gradient(objective.optimum)) < 1e-5
        assert objective.lipschitz > 0.0

    def test_shape_checks(self):
        with pytest.raises(ParameterError):
            QuadraticObjective(np.zeros((2, 3)))
        with pytest.raises(ParameterError):
            LogisticObjective(np.zeros((2, 3, 4)), np.ones((2, 2)))


class TestBound:
    def test_compression_term(self):
        assert compression_term(0.5, 2.0, 1.0, 10, 4) == 2.0
        assert compression_term(0.5, 2.0, 0.01, 10, 4) == pytest.approx(0.12)

    def test_holds_for_exact_descent(self):
        objective = QuadraticObjective(np.ones((1, 1, 3)))
        report = verify_bound([run_trace(objective, EXACT, seed=0)], EXACT, objective)
        assert report.passed
        assert report.complete
        assert report.terms["privacy_noise"] == 0.0

    def test_holds_for_full_mechanism(self):
        objective = make_objective(SMALL, seed=1)
        report = verify_bound(run_traces(objective, SMALL), SMALL, objective)
        assert report.passed
        assert report.lhs <= report.rhs
        assert set(report.terms) == {"compression", "privacy_noise", "initial_gap", "stochastic", "quantization"}
        assert report.constants["kind"] == "trajectory-empirical"
        assert json.loads(report.to_json())["pass"] is True

    def test_missing_lipschitz_gives_incomplete_report(self):
        objective = make_objective(SMALL, seed=1)
        traces = run_traces(objective, replace(SMALL, seeds=1))
        objective.lipschitz = None
        report = verify_bound(traces, SMALL, objective)
        assert not report.complete
        assert report.passed is None
        assert report.missing == ["L"]

    def test_no_traces(self):
        report = verify_bound([], SMALL, make_objective(SMALL, seed=1))
        assert report.missing == ["trace"]

    def test_violation(self):
        objective = QuadraticObjective(np.zeros((1, 1, 3)))
        fake = Trace(seed=0, k=3, values=[0.0, 0.0], grad_terms=[1e9], sigma=np.zeros(3), tau=np.zeros(4))
        with pytest.raises(InvariantViolationError):
            verify_bound([fake], EXACT, objective)
        assert verify_bound([fake], EXACT, objective, strict=False).passed is False

    def test_tradeoff(self):
        objective = make_objective(SMALL, seed=1)
        rows = tradeoff(run_traces(objective, SMALL), SMALL, objective, [2, 8, 5])
        assert [r.k for r in rows] == [8, 5, 2]
        assert [r.privacy_noise for r in rows] == sorted((r.privacy_noise for r in rows), reverse=True)
        assert [r.compression for r in rows] == sorted(r.compression for r in rows)

    def test_run_convergence_sweep(self):
        result = run_convergence(replace(SMALL, k_sweep=(2, 8)))
        assert result.report.passed
        assert [r.k for r in result.sweep] == [8, 2]
        assert len(result.tradeoff) == 2
        assert set(result.to_dict()) == {"report", "sweep", "tradeoff"}

    def test_workers_do_not_change_traces(self):
        objective = make_objective(SMALL, seed=1)
        serial = run_traces(objective, SMALL, workers=1)
        threaded = run_traces(objective, SMALL, workers=3)
        assert [t.values for t in serial] == [t.values for t in threaded]
