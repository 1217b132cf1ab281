# Copyright 2025 The sgd_stoptime Authors

import math

import pytest

from sgd_stoptime.core.engine import Trajectory
from sgd_stoptime.diagnostics.recursion import check_recursive_inequality, estimate_delta_ab, mean_halfwidth
from sgd_stoptime.diagnostics.report import STATUS_FAIL, STATUS_INCONCLUSIVE, STATUS_PASS
from sgd_stoptime.model.oracle import AdditiveGaussianOracle
from sgd_stoptime.model.problem import QuadraticProblem
from sgd_stoptime.model.schedule import PowerLawSchedule


@pytest.fixture
def components():
    """Problem, oracle and schedule with L = G = 1.

    Returns:
        tuple: (QuadraticProblem d=1, noiseless AdditiveGaussianOracle, PowerLawSchedule q=1)
    """
    return QuadraticProblem.isotropic(1), AdditiveGaussianOracle(sigma=0.0), PowerLawSchedule(q=1.0)


def excursion_pair() -> list[Trajectory]:
    # one step on (1, 2) with |grad| 0.1 and one on (2, 3) with |grad| 2
    return [Trajectory.from_arrays(eps=[1.0] * 3, f=[1.5, 2.5, 0.5], grad_norm=[0.1, 2.0, 1.0], seed=s)
            for s in (0, 1)]


def test_recursive_inequality_holds(components):
    result = check_recursive_inequality(excursion_pair(), 1.0, 2.0, 3.0, 1, *components,
                                        delta_ab=0.5, c_half_gap=0.0)
    assert result.status == STATUS_PASS
    assert result.value == pytest.approx(4.0)
    assert result.tolerance == pytest.approx(5.0)
    assert result.details["C1"] == pytest.approx(500.0)


def test_recursive_inequality_detects_scaled_C1(components):
    result = check_recursive_inequality(excursion_pair(), 1.0, 2.0, 3.0, 1, *components,
                                        delta_ab=0.5, c_half_gap=0.0, c1_scale=0.5)
    assert result.status == STATUS_FAIL
    assert result.tolerance == pytest.approx(2.5)


def test_recursive_inequality_estimates_delta(components):
    result = check_recursive_inequality(excursion_pair(), 1.0, 2.0, 3.0, 1, *components, c_half_gap=0.0)
    assert result.details["delta_ab_estimated"]
    assert result.details["delta_ab"] == pytest.approx(0.1)


def test_recursive_inequality_without_excursions(components):
    flat = [Trajectory.from_arrays(eps=[1.0] * 3, f=[0.0] * 3, grad_norm=[1.0] * 3)]
    assert check_recursive_inequality(flat, 1.0, 2.0, 3.0, 1, *components).status == STATUS_INCONCLUSIVE
    diverged = [Trajectory.from_arrays(eps=[1.0] * 3, f=[1.5, 2.5, 0.5], grad_norm=[1.0] * 3, diverged=True)]
    result = check_recursive_inequality(diverged, 1.0, 2.0, 3.0, 1, *components)
    assert result.status == STATUS_INCONCLUSIVE
    assert result.passed is None


def test_recursive_inequality_level_order(components):
    with pytest.raises(ValueError):
        check_recursive_inequality(excursion_pair(), 2.0, 1.0, 3.0, 1, *components)


def test_estimate_delta_ab():
    assert estimate_delta_ab(excursion_pair(), 1.0, 3.0) == pytest.approx(0.1)
    assert math.isinf(estimate_delta_ab(excursion_pair(), 5.0, 6.0))


def test_mean_halfwidth():
    assert mean_halfwidth([2.0]) == (2.0, 0.0)
    mean, halfwidth = mean_halfwidth([1.0, 3.0])
    assert mean == 2.0
    assert halfwidth == pytest.approx(1.96 * math.sqrt(2.0) / math.sqrt(2.0))
    assert all(math.isnan(v) for v in mean_halfwidth([]))
