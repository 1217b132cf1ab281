# Copyright 2025 The sgd_stoptime Authors

import numpy as np
import pytest

from sgd_stoptime.diagnostics.report import STATUS_NOT_EVALUABLE
from sgd_stoptime.model.oracle import (
    AdditiveGaussianOracle,
    AdditiveStudentTOracle,
    FiniteSumOracle,
    MultiplicativeGaussianOracle,
    ParetoAdditiveOracle,
    check_local_moments,
    check_unbiased,
    check_weak_growth,
    gaussian_moment_bound,
    hill_tail_index,
    make_stream,
    oracle_from_dict,
)
from sgd_stoptime.model.problem import NonCoerciveDemo, QuadraticProblem, UnitBallSampler


@pytest.fixture
def quadratic() -> QuadraticProblem:
    """Two dimensional isotropic quadratic with L = 1.

    Returns:
        QuadraticProblem: f(x) = ||x||^2 / 2
    """
    return QuadraticProblem.isotropic(2)


def test_streams_are_reproducible():
    a = make_stream(7, 0).standard_normal(5)
    np.testing.assert_array_equal(a, make_stream(7, 0).standard_normal(5))
    assert not np.array_equal(a, make_stream(7, 1).standard_normal(5))


def test_noiseless_sample_is_gradient(quadratic):
    oracle = AdditiveGaussianOracle(sigma=0.0)
    theta = np.array([1.0, -2.0])
    np.testing.assert_array_equal(oracle.sample(quadratic, theta, make_stream(0, 0)), quadratic.gradient(theta))


@pytest.mark.parametrize("oracle",
                         [
                             AdditiveGaussianOracle(sigma=0.1),
                             AdditiveStudentTOracle(dof=5.0, scale=0.1),
                             MultiplicativeGaussianOracle(sigma=0.1),
                             ParetoAdditiveOracle(alpha=3.5, scale=0.1),
                             FiniteSumOracle(n_components=50, batch_size=5),
                             FiniteSumOracle(n_components=10, batch_size=10),
                             AdditiveGaussianOracle(sigma=0.0),
                         ])
def test_unbiased(oracle, quadratic):
    result = check_unbiased(oracle, quadratic, [0.5, -0.5], n=20000, seed=3)
    assert result.passed


def test_biased_oracle_is_detected(quadratic):
    result = check_unbiased(AdditiveGaussianOracle(sigma=0.1, bias=0.5), quadratic, [0.5, -0.5], n=1000, seed=0)
    assert not result.passed
    assert result.value > 100.0


def test_unbiased_needs_draws(quadratic):
    with pytest.raises(ValueError):
        check_unbiased(AdditiveGaussianOracle(sigma=0.1), quadratic, [0.0, 0.0], n=50, seed=0)


def test_weak_growth(quadratic):
    points = [[0.0, 0.0], [1.0, 1.0], [3.0, -2.0]]
    assert check_weak_growth(AdditiveGaussianOracle(sigma=0.1, G=1.0), quadratic, points, 5000, 0).passed
    result = check_weak_growth(AdditiveGaussianOracle(sigma=0.0, G=0.01), quadratic, points, 100, 0)
    assert not result.passed
    assert result.details["worst_point"] == 2


def test_consistency_check(quadratic):
    assert AdditiveGaussianOracle(sigma=0.1, G=1.0).consistency_check(quadratic)
    assert not AdditiveGaussianOracle(sigma=1.0, G=1.0).consistency_check(quadratic)


def test_moment_bound():
    oracle = AdditiveGaussianOracle(sigma=0.1, p=3.0, M0=10.0, M1=5.0)
    assert oracle.moment_bound(3.0) == 1000.0
    assert oracle.moment_bound(4.0) == 625.0
    with pytest.raises(ValueError):
        oracle.moment_bound(5.0)


def test_finite_sum_full_batch_is_exact(quadratic):
    oracle = FiniteSumOracle(n_components=8, batch_size=8)
    samples = oracle.sample_batch(quadratic, np.array([1.0, 2.0]), make_stream(0, 0), 4)
    np.testing.assert_array_equal(samples, np.tile([1.0, 2.0], (4, 1)))


def test_hill_tail_index():
    samples = make_stream(0, 0).pareto(3.0, 100000) + 1.0
    assert hill_tail_index(samples) == pytest.approx(3.0, abs=0.6)
    assert np.isnan(hill_tail_index([1.0, 2.0]))


def _fixed_sampler(value: float):
    def sampler(rng, n, d):
        return np.full((n, d), value)
    return sampler


def test_moments_heavy_tail_orders():
    problem = QuadraticProblem.isotropic(1)
    light = ParetoAdditiveOracle(alpha=3.5, scale=0.1, p=3.0)
    result = check_local_moments(light, problem, "sublevel", 3.0, _fixed_sampler(0.9), n_points=2, seed=0)
    assert result.passed
    heavy = ParetoAdditiveOracle(alpha=3.5, scale=1.0, p=3.0)
    result = check_local_moments(heavy, problem, "sublevel", 4.0, _fixed_sampler(0.0), n_points=4, seed=0)
    assert not result.passed
    assert not result.details["stabilized"]


def test_moments_noiseless_region_bound():
    problem = QuadraticProblem.isotropic(2)
    oracle = AdditiveGaussianOracle(sigma=0.0, p=3.0, M0=1.0)
    result = check_local_moments(oracle, problem, "sublevel", 3.0, UnitBallSampler(1.0), n_points=3,
                                 draw_sizes=(100, 1000), seed=0)
    assert result.passed
    # ||grad f||^2 <= 2 L D_eta inside the sublevel region
    assert result.value <= (2.0 * problem.lipschitz_L * problem.D_eta) ** 1.5


def test_moments_unknown_region():
    with pytest.raises(ValueError):
        check_local_moments(AdditiveGaussianOracle(sigma=0.1), QuadraticProblem.isotropic(1), "ball", 3.0,
                            UnitBallSampler(1.0), n_points=1)


def test_moments_s_delta_without_critical_values():
    problem = NonCoerciveDemo()
    problem_without = type("Uncertified", (NonCoerciveDemo,), {"critical_values": property(lambda self: None)})()
    oracle = AdditiveGaussianOracle(sigma=0.1)
    result = check_local_moments(oracle, problem_without, "s_delta", 4.0, UnitBallSampler(1.0), n_points=1)
    assert result.status == STATUS_NOT_EVALUABLE
    assert problem.critical_values is not None


@pytest.mark.parametrize("spec, exception",
                         [
                             ({"oracle": "laplace"}, KeyError),
                             ({"oracle": "additive_gaussian", "sigma": 0.1, "kappa": 1}, ValueError),
                             ({"oracle": "additive_gaussian", "sigma": 0.1, "p": 2.0}, ValueError),
                             ({"oracle": "pareto_additive", "alpha": 1.5}, ValueError),
                             ({"oracle": "finite_sum", "n_components": 4, "batch_size": 5}, ValueError),
                         ])
def test_oracle_from_dict_errors(spec, exception):
    with pytest.raises(exception):
        oracle_from_dict(spec)


def test_oracle_from_dict():
    oracle = oracle_from_dict({"oracle": "additive_gaussian", "sigma": 0.1, "G": 1.0, "p": 3.0,
                               "M0": 10.0, "M1": 50.0, "delta": 0.05})
    assert isinstance(oracle, AdditiveGaussianOracle)
    assert oracle.describe()["sigma"] == 0.1


@pytest.mark.parametrize("order, grad_norm_bound, sigma, d, expected",
                         [
                             (2.0, 0.0, 1.0, 3, 3.0),
                             (2.0, 1.0, 0.0, 5, 1.0),
                             (4.0, 0.0, 1.0, 1, 3.0),
                         ])
def test_gaussian_moment_bound(order, grad_norm_bound, sigma, d, expected):
    assert gaussian_moment_bound(order, grad_norm_bound, sigma, d) == pytest.approx(expected)


def test_analytic_G(quadratic):
    assert AdditiveGaussianOracle(sigma=2.0).analytic_G(quadratic) == pytest.approx(8.0)
    assert AdditiveGaussianOracle(sigma=0.1).analytic_G(quadratic) == pytest.approx(1.0)
    assert AdditiveGaussianOracle(sigma=0.1, bias=0.5).analytic_G(quadratic) is None
