# Copyright 2025 The sgd_stoptime Authors

import math

import numpy as np
import pytest

from sgd_stoptime.core.engine import FingerprintMismatch, Trajectory
from sgd_stoptime.diagnostics.ladder import (
    build_ladder,
    grad_quadratic_variation,
    hitting_time,
    ladder_from_gaps,
    tau_excursions,
    tau_ladder,
)


GAPS = [0.5, 1.2, 1.5, 2.5]


@pytest.fixture
def trajectory() -> Trajectory:
    """Four-step hand-built trajectory over GAPS with unit step sizes.

    Returns:
        Trajectory: f = GAPS, grad_norm = 1, 2, 3, 4
    """
    return Trajectory.from_arrays(eps=[1.0] * 4, f=GAPS, grad_norm=[1.0, 2.0, 3.0, 4.0])


def test_ladder_times():
    ladder = ladder_from_gaps(GAPS, 1.0, 2.0)
    np.testing.assert_array_equal(ladder.times, [2.0, 4.0, math.inf])
    assert list(ladder.excursions()) == [(2, 3)]
    np.testing.assert_array_equal(ladder.truncated(), [2, 4, 4])


def test_ladder_truncation():
    ladder = ladder_from_gaps(GAPS, 1.0, 2.0, T=3)
    np.testing.assert_array_equal(ladder.times, [2.0, math.inf])
    assert list(ladder.excursions()) == [(2, 2)]


def test_ladder_never_reaches_level():
    ladder = ladder_from_gaps([0.1, 0.2], 1.0, 2.0)
    np.testing.assert_array_equal(ladder.times, [math.inf])
    assert list(ladder.excursions()) == []


@pytest.mark.parametrize("h1, h2, T",
                         [
                             (2.0, 1.0, None),
                             (1.0, 1.0, None),
                             (1.0, 2.0, 0),
                             (1.0, 2.0, 5),
                         ])
def test_ladder_errors(h1, h2, T):
    with pytest.raises(ValueError):
        ladder_from_gaps(GAPS, h1, h2, T=T)


def test_grad_quadratic_variation(trajectory):
    ladder = build_ladder(trajectory, 1.0, 2.0)
    assert grad_quadratic_variation(trajectory, ladder, 1) == 13.0
    halved = Trajectory.from_arrays(eps=[0.5] * 4, f=GAPS, grad_norm=[1.0, 2.0, 3.0, 4.0])
    assert grad_quadratic_variation(halved, build_ladder(halved, 1.0, 2.0), 2) == 3.25


def test_grad_quadratic_variation_checks_origin(trajectory):
    with pytest.raises(FingerprintMismatch):
        grad_quadratic_variation(trajectory, ladder_from_gaps(GAPS, 1.0, 2.0), 1)
    with pytest.raises(ValueError):
        grad_quadratic_variation(trajectory, build_ladder(trajectory, 1.0, 2.0), 0)


def test_hitting_time():
    trajectory = Trajectory.from_arrays(eps=[1.0] * 4, f=[0.0] * 4, grad_norm=[3.0, 2.0, 1.0, 0.5])
    assert hitting_time(trajectory, 1, 1.0) == 3
    assert hitting_time(trajectory, 4, 1.0) == 4
    assert math.isinf(hitting_time(trajectory, 1, 0.1))
    with pytest.raises(ValueError):
        hitting_time(trajectory, 0, 1.0)


def test_tau_ladder():
    times = tau_ladder([0.0, 1.5, 2.5, 3.5, 0.5, 2.5], 1.0, 2.0, 3.0)
    np.testing.assert_array_equal(times, [2.0, 3.0, 4.0, 5.0, 6.0, 6.0, math.inf])
    assert tau_excursions(times, 6) == [(3, 3)]
    with pytest.raises(ValueError):
        tau_ladder([0.0], 1.0, 3.0, 2.0)
