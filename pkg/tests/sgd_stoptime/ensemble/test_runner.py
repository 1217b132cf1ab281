# Copyright 2025 The sgd_stoptime Authors

import numpy as np
import pytest

from sgd_stoptime.core.config import ExperimentConfig
from sgd_stoptime.ensemble.runner import EnsembleRunner, run_ensemble
from sgd_stoptime.model.schedule import ConstantSchedule
from sgd_stoptime.types import Verdict


def test_minimal_ensemble_passes(minimal_config):
    result = run_ensemble(ExperimentConfig(minimal_config))
    assert result.seeds == [0, 1]
    assert sorted(result.reports) == [0, 1]
    assert result.failures == {}
    assert result.diverged_fraction == 0.0
    assert [r.check_name for r in result.results] == ["descent_residuals", "grad_trend"]
    assert result.passed(0.0)
    assert result.exit_code(0.0) == 0
    assert result.classification.relaxed == Verdict.YES
    assert result.trajectories == {}


def test_ensemble_overrides(minimal_config):
    minimal_config["export_trajectories"] = True
    result = run_ensemble(ExperimentConfig(minimal_config), n=3, base_seed=10)
    assert result.seeds == [10, 11, 12]
    assert sorted(result.trajectories) == [10, 11, 12]
    assert result.stats.n_trajectories == 3


def test_worker_count_does_not_change_results(make_setup):
    diagnostics = [{"check": "grad_trend"}, {"check": "martingale_mean"}]
    serial = EnsembleRunner(make_setup(), diagnostics, threads=1).run(4, base_seed=3)
    parallel = EnsembleRunner(make_setup(), diagnostics, threads=2).run(4, base_seed=3)
    np.testing.assert_array_equal(serial.stats.mean_grad_sq, parallel.stats.mean_grad_sq)
    assert serial.final_values == parallel.final_values
    assert [r.to_dict() for r in serial.results] == [r.to_dict() for r in parallel.results]


def test_diverged_ensemble(make_setup):
    setup = make_setup(schedule=ConstantSchedule(3.0), T=5000)
    result = EnsembleRunner(setup, [{"check": "grad_trend"}]).run(2)
    assert result.stats.diverged_count == 2
    assert result.diverged_fraction == 1.0
    assert result.exit_code(0.0) == 1
    # nothing failed, all trajectories diverged
    assert result.failed_results() == []
    assert result.exit_code(1.0) == 0
    assert all(r.by_name("divergence") for r in result.reports.values())


@pytest.mark.parametrize("threads, n", [(-1, 2), (1, 1), (1, 0)])
def test_runner_arguments(make_setup, threads, n):
    with pytest.raises(ValueError):
        EnsembleRunner(make_setup(), threads=threads).run(n)


def test_zero_threads_uses_all_cpus(make_setup):
    auto = EnsembleRunner(make_setup(), [{"check": "grad_trend"}], threads=0).run(3)
    serial = EnsembleRunner(make_setup(), [{"check": "grad_trend"}], threads=1).run(3)
    assert auto.final_values == serial.final_values
    assert [r.to_dict() for r in auto.results] == [r.to_dict() for r in serial.results]


def test_noiseless_ensemble_statistics(minimal_config):
    stats = run_ensemble(ExperimentConfig(minimal_config)).stats
    assert len(stats.mean_mart_inc) == len(stats.checkpoints)
    assert stats.mean_mart_inc == [0.0] * len(stats.checkpoints)
    assert 0.0 <= stats.min_grad_norm_mean < np.sqrt(2.0)


@pytest.mark.slow
def test_golden_recursive_inequality_halved_c1():
    config = ExperimentConfig.from_json("golden_cos_quadratic.json")
    levels = {"a": 1.0, "b": 2.0, "c": 3.0, "m": 1}
    diagnostics = [dict(levels, check="recursive_inequality"),
                   dict(levels, check="recursive_inequality", c1_scale=0.5)]
    result = EnsembleRunner(config.build_setup(), diagnostics, threads=0).run(config.n_trajectories, config.base_seed)
    full, halved = result.results
    assert full.passed
    assert halved.params["c1_scale"] == 0.5
    assert halved.details["C1"] == pytest.approx(0.5 * full.details["C1"])
    assert halved.value == full.value
    assert halved.tolerance <= full.tolerance
    assert halved.passed == (halved.value <= halved.tolerance + 2.0 * halved.stderr_halfwidth)
