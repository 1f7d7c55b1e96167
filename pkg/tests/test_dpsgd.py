"""
Tests for DP-SGD with NormTopK and the control experiment.
"""

from dataclasses import replace

import numpy as np
import pytest

from topagg.accountant.ledger import PrivacyLedger, SampledGaussianEvent
from topagg.core.config import SgdConfig
from topagg.dpsgd.control import ControlRow, ControlTable, run_control_experiment, scenario_epsilon
from topagg.dpsgd.tasks import LogisticTask, MlpTask, loss, make_task, make_task_data
from topagg.dpsgd.train import Scenario, dpsgd_step, poisson_batch, privatize_gradients, train
from topagg.exceptions import ConfigurationError, DimensionMismatchError, ParameterError

SMALL = SgdConfig(batch_size=20, samples=100, dim=5, epochs=2, seeds=2)


def _row(scenario, seed, final_loss):
    return ControlRow(scenario.value, seed, final_loss, 0.5, 1.0, 1.0, 1.0, 0.5, 20, 0.5)


class TestPrivatize:
    def test_hand_example(self, rng):
        per_sample = np.array([[2.0, 0.0], [0.0, 0.5]])
        out = privatize_gradients(per_sample, C=1.0, k=1.0, noise_std=0.0, batch_size=2, rng=rng)
        assert np.allclose(out, [0.5, 0.25])

    def test_norm_top_k_after_clipping(self, rng):
        per_sample = np.array([[3.0, 4.0]])
        assert np.allclose(privatize_gradients(per_sample, 1.0, 0.7, 0.0, 1, rng), [0.0, 0.8])
        assert np.allclose(privatize_gradients(per_sample, 1.0, 0.5, 0.0, 1, rng), [0.0, 0.0])
        assert np.allclose(privatize_gradients(per_sample, 1.0, 0.5, 0.0, 1, rng, compressed=False), [0.6, 0.8])

    def test_reduces_to_plain_sgd(self, rng):
        per_sample = rng.normal(size=(3, 4))
        out = privatize_gradients(per_sample, C=1e6, k=1.0, noise_std=0.0, batch_size=3, rng=rng)
        assert np.allclose(out, per_sample.mean(axis=0))

    def test_noise_scale(self):
        out = privatize_gradients(np.zeros((0, 5000)), 1.0, 1.0, 2.0, 4, np.random.default_rng(0))
        assert np.std(out) == pytest.approx(0.5, rel=0.05)

    def test_empty_batch_without_noise(self, rng):
        assert privatize_gradients(np.zeros((0, 3)), 1.0, 0.5, 0.0, 2, rng).tolist() == [0.0, 0.0, 0.0]

    def test_batch_size_must_be_positive(self, rng):
        with pytest.raises(ParameterError):
            privatize_gradients(np.zeros((1, 2)), 1.0, 0.5, 0.0, 0, rng)


class TestScenario:
    def test_noise_cells(self):
        assert Scenario.CLIPPED_SGD.noise_std(2.0, 1.0, 0.25) == 0.0
        assert Scenario.TOPK_SGD.noise_std(2.0, 1.0, 0.25) == 0.0
        assert Scenario.TOPK_GM_DP.noise_std(2.0, 1.0, 0.25) == 2.0
        assert Scenario.GM_DP.noise_std(2.0, 1.0, 0.25) == 2.0
        assert Scenario.TOPAGG_SGD.noise_std(2.0, 1.0, 0.25) == 1.0

    def test_compressed_cells(self):
        assert [s.compressed for s in Scenario] == [False, True, True, True, False]

    def test_noise_multiplier(self):
        assert Scenario.TOPAGG_SGD.noise_multiplier(2.0, 0.25) == pytest.approx(2.0)
        assert Scenario.TOPK_GM_DP.noise_multiplier(2.0, 0.25) == pytest.approx(4.0)
        assert Scenario.CLIPPED_SGD.noise_multiplier(2.0, 0.25) == float("inf")

    def test_poisson_batch(self, rng):
        assert poisson_batch(10, 0.0, rng).size == 0
        assert poisson_batch(10, 1.0, rng).tolist() == list(range(10))
        with pytest.raises(ParameterError):
            poisson_batch(10, 1.5, rng)


class TestTasks:
    @pytest.mark.parametrize("task", [LogisticTask(3), MlpTask(3, 4)])
    def test_per_sample_gradients_match_finite_differences(self, task, rng):
        theta = task.init(rng) + 0.1 * rng.normal(size=task.num_parameters)
        x, y = rng.normal(size=(4, 3)), np.array([0, 1, 1, 0])
        grads = task.per_sample_gradients(theta, x, y)
        eps = 1e-6
        for i in range(4):
            expected = np.zeros(task.num_parameters)
            for j in range(task.num_parameters):
                step = np.zeros(task.num_parameters)
                step[j] = eps
                expected[j] = (loss(task, theta + step, x[i : i + 1], y[i : i + 1]) - loss(task, theta - step, x[i : i + 1], y[i : i + 1])) / (2 * eps)
            assert np.allclose(grads[i], expected, atol=1e-6)

    def test_make_task(self):
        assert make_task("logistic", 4).num_parameters == 5
        assert make_task("mlp", 4, 2).num_parameters == 13
        with pytest.raises(ConfigurationError):
            make_task("transformer", 4)

    def test_dimension_check(self):
        with pytest.raises(DimensionMismatchError):
            LogisticTask(3).logits(np.zeros(4), np.zeros((1, 2)))


class TestTrain:
    def test_step_moves_parameters(self):
        task = LogisticTask(SMALL.dim)
        data = make_task_data(SMALL.samples, SMALL.dim, seed=1)
        rngs = np.random.default_rng(0), np.random.default_rng(1)
        theta = dpsgd_step(task, task.init(rngs[0]), data, SMALL, Scenario.CLIPPED_SGD, *rngs)
        assert theta.shape == (SMALL.dim + 1,)
        assert np.any(theta != 0.0)

    def test_loss_recorded_per_epoch(self):
        task = LogisticTask(SMALL.dim)
        data = make_task_data(SMALL.samples, SMALL.dim, seed=1)
        result, acc = train(task, data, SMALL, Scenario.GM_DP, seed=3)
        assert len(result.losses) == SMALL.epochs
        assert result.steps == SMALL.steps == 10
        assert 0.0 <= acc <= 1.0

    def test_noiseless_training_lowers_loss(self):
        task = LogisticTask(SMALL.dim)
        data = make_task_data(SMALL.samples, SMALL.dim, seed=1)
        result, _ = train(task, data, SMALL, Scenario.CLIPPED_SGD, seed=3)
        assert result.final_loss < np.log(2.0)

    def test_scenarios_share_batches(self):
        task = LogisticTask(SMALL.dim)
        data = make_task_data(SMALL.samples, SMALL.dim, seed=1)
        quiet = replace(SMALL, sigma=0.0)
        a, _ = train(task, data, quiet, Scenario.CLIPPED_SGD, seed=4)
        b, _ = train(task, data, quiet, Scenario.GM_DP, seed=4)
        assert np.array_equal(a.theta, b.theta)


class TestControl:
    def test_epsilon_per_scenario(self):
        assert scenario_epsilon(SMALL, Scenario.CLIPPED_SGD) == float("inf")
        topagg = scenario_epsilon(SMALL, Scenario.TOPAGG_SGD)
        assert topagg == pytest.approx(scenario_epsilon(SMALL, Scenario.GM_DP))
        # Full noise on a sqrt(k)-sensitive sum is the most private cell.
        assert topagg > scenario_epsilon(SMALL, Scenario.TOPK_GM_DP)

    def test_epsilon_matches_ledger(self):
        ledger = PrivacyLedger(delta=SMALL.delta).compose(SampledGaussianEvent(SMALL.sampling_rate, SMALL.sigma, SMALL.steps))
        assert scenario_epsilon(SMALL, Scenario.GM_DP) == pytest.approx(ledger.epsilon()[0])

    def test_table(self):
        table = run_control_experiment(SMALL, scenarios=("ClippedSGD", "GM_DP"))
        assert len(table.rows) == 4
        assert set(table.summary()) == {"ClippedSGD", "GM_DP"}
        assert table.summary()["ClippedSGD"]["epsilon"] == float("inf")

    def test_rows_do_not_depend_on_workers(self):
        serial = run_control_experiment(SMALL, scenarios=("TopAgg_SGD",), workers=1)
        threaded = run_control_experiment(SMALL, scenarios=("TopAgg_SGD",), workers=2)
        assert [r.to_dict() for r in serial.rows] == [r.to_dict() for r in threaded.rows]

    def test_paired_gap(self):
        table = ControlTable([_row(Scenario.GM_DP, 0, 0.5), _row(Scenario.GM_DP, 1, 0.7), _row(Scenario.TOPAGG_SGD, 0, 0.4), _row(Scenario.TOPAGG_SGD, 1, 0.5)])
        mean, se = table.paired_gap(Scenario.TOPAGG_SGD, Scenario.GM_DP)
        assert mean == pytest.approx(0.15)
        assert se == pytest.approx(0.05)

    def test_unknown_scenario(self):
        with pytest.raises(ConfigurationError):
            replace(SMALL, scenarios=("FancySGD",))

    @pytest.mark.slow
    def test_reduced_noise_beats_full_noise(self):
        config = SgdConfig(sigma=4.0, seeds=10)
        table = run_control_experiment(config, scenarios=("ClippedSGD", "TopK_GM_DP", "TopAgg_SGD", "GM_DP"))
        mean, se = table.paired_gap(Scenario.TOPAGG_SGD, Scenario.TOPK_GM_DP)
        assert mean > -se
        mean, se = table.paired_gap(Scenario.CLIPPED_SGD, Scenario.GM_DP)
        assert mean > -se
