# Copyright 2025 The sgd_stoptime Authors

import pytest

from sgd_stoptime.core.engine import Trajectory
from sgd_stoptime.core.processing import DiagnosticsProcessor
from sgd_stoptime.diagnostics.report import DiagnosticResult, STATUS_NOT_EVALUABLE
from sgd_stoptime.pipeline import EnsembleStatsContext, GradTrendContext, collect_statistics, grad_trend


def finite_trajectory(seed: int = 0) -> Trajectory:
    return Trajectory.from_arrays(eps=[0.5] * 4, f=[2.0, 1.0, 0.5, 0.25], grad_norm=[2.0, 1.4, 1.0, 0.7],
                                  seed=seed)


def diverged_trajectory(seed: int = 9) -> Trajectory:
    return Trajectory.from_arrays(eps=[3.0] * 4, f=[2.0, 50.0, 1e6, 1e300], grad_norm=[2.0, 10.0, 1e3, 1e150],
                                  seed=seed, diverged=True, last_finite_step=3)


@pytest.fixture
def processor() -> DiagnosticsProcessor:
    """Processor with only the built-in sanity check registered.

    Returns:
        DiagnosticsProcessor: fresh processor
    """
    return DiagnosticsProcessor()


def test_sanity_check_accepts_finite_trajectory(processor):
    report = processor.process(finite_trajectory())
    assert len(report) == 0
    assert processor.trajectory_count == 1


def test_sanity_check_reports_divergence(processor):
    report = processor.process(diverged_trajectory())
    assert [r.check_name for r in report] == ["divergence"]
    result = report.results[0]
    assert result.status == STATUS_NOT_EVALUABLE
    assert result.details["last_finite_step"] == 3
    assert report.passed


def test_sanity_check_flags_values_below_f_star(processor):
    trajectory = Trajectory.from_arrays(eps=[1.0] * 2, f=[0.5, -1.0], grad_norm=[1.0, 1.0])
    failures = processor.process(trajectory).failures()
    assert [r.check_name for r in failures] == ["lower_bound_records"]
    assert failures[0].value == 1


def test_diverged_trajectories_skip_regular_checks(processor, make_setup):
    setup = make_setup(T=4)
    trend = GradTrendContext(setup)
    stats = EnsembleStatsContext(setup, 2)
    processor.register_stage(collect_statistics, stats)
    processor.register_stage(grad_trend, trend)
    assert trend.is_enabled and stats.is_enabled

    processor.process(finite_trajectory())
    processor.process(diverged_trajectory())
    assert trend.grad_sq.seeds() == [0]
    assert stats.diverged.seeds() == [9]

    results = processor.drain()
    assert [r.check_name for r in results] == ["grad_trend"]
    assert stats.stats.diverged_count == 1
    assert processor.stages == []


def test_stage_keyword_arguments(processor):
    def scaled_value(trajectory, _context, kwargs):
        return [DiagnosticResult("scaled", {"seed": trajectory.seed}, value=kwargs["factor"] * trajectory.f[0])]

    processor.register_stage(scaled_value, factor=3.0)
    report = processor.process(finite_trajectory(seed=4))
    assert report.by_name("scaled")[0].value == 6.0
    assert report.seed == 4
