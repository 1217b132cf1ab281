# Copyright 2025 The sgd_stoptime Authors

import numpy as np
import pytest

from sgd_stoptime.diagnostics.bounds import (
    chain_levels,
    chained_bound,
    compute_C0,
    compute_C1_C2,
    compute_C_bar_nu,
    compute_C_nu,
    theta_moment_constant,
    upcrossing_bound,
)
from sgd_stoptime.model.schedule import ConstantSchedule, PowerLawSchedule


def test_C1_C2_closed_form():
    schedule = PowerLawSchedule(q=0.4)
    C1, C2 = compute_C1_C2(1.0, 2.0, 1, L=1.0, G=1.0, delta_ab=0.5, schedule=schedule, C_half_gap=0.0)
    assert C1 == pytest.approx(500.0)
    assert C2 == 0.0
    _, C2 = compute_C1_C2(1.0, 2.0, 1, L=1.0, G=1.0, delta_ab=0.5, schedule=schedule, C_half_gap=1.0)
    assert C2 == pytest.approx(24.0)


@pytest.mark.parametrize("a, b, delta_ab",
                         [
                             (2.0, 1.0, 0.5),
                             (0.0, 1.0, 0.5),
                             (1.0, 2.0, 0.0),
                         ])
def test_C1_C2_errors(a, b, delta_ab):
    with pytest.raises(ValueError):
        compute_C1_C2(a, b, 1, 1.0, 1.0, delta_ab, PowerLawSchedule(q=0.4), 0.0)


def test_C_bar_nu():
    assert compute_C_bar_nu(nu=1.0, D_eta=1.0, L=1.0, p=4.0) == pytest.approx(4.0)
    with pytest.raises(ValueError):
        compute_C_bar_nu(nu=1.0, D_eta=1.0, L=1.0, p=2.0)
    with pytest.raises(ValueError):
        compute_C_bar_nu(nu=0.0, D_eta=1.0, L=1.0, p=3.0)


def test_C_nu_uses_power_sum():
    schedule = PowerLawSchedule(q=0.5, scale=0.5)
    value = compute_C_nu(0.5, 1.0, 1.0, 3.0, 2.0, schedule, horizon=1000)
    expected = compute_C_bar_nu(0.5, 1.0, 1.0, 3.0) * 2.0**3 * schedule.power_sum(3.0, 1000)
    assert value == pytest.approx(expected)


@pytest.mark.parametrize("schedule", [PowerLawSchedule(q=0.3), ConstantSchedule(0.1)])
def test_C_nu_needs_relaxed_schedule(schedule):
    with pytest.raises(ValueError):
        compute_C_nu(0.5, 1.0, 1.0, 3.0, 1.0, schedule, horizon=1000)


def test_C0_and_upcrossing_bound():
    assert compute_C0(1.0, 2.0, L=1.0, G=1.0, delta0=1.0) == pytest.approx(8.0)
    assert upcrossing_bound(1.0, 2.0, C_gap8=3.0, C0=3.0, gqv=1.0) == pytest.approx(9.0)
    assert upcrossing_bound(1.0, 2.0, C_gap8=0.0, C0=3.0, gqv=0.0) == 1.0
    with pytest.raises(ValueError):
        compute_C0(2.0, 1.0, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        upcrossing_bound(2.0, 2.0, 1.0, 1.0, 1.0)


def test_chain_levels():
    np.testing.assert_allclose(chain_levels(1.0, 3.0, 3.0), [1.0, 5.0 / 3.0, 7.0 / 3.0, 3.0])
    assert len(chain_levels(1.0, 3.0, 2.5)) == 4
    with pytest.raises(ValueError):
        chain_levels(3.0, 1.0, 3.0)


def test_chained_bound():
    schedule = PowerLawSchedule(q=0.5, scale=0.5)
    bounds = chained_bound([1.0, 2.0, 3.0], terminal=1.0, L=1.0, G=1.0, delta=0.5, schedule=schedule,
                           D_eta=0.5, M0=1.0)
    assert len(bounds) == 2
    assert bounds[0] == 1.0
    C1, _ = compute_C1_C2(1.0, 2.0, 1, 1.0, 1.0, 0.5, schedule, 0.0)
    assert bounds[1] >= C1


@pytest.mark.parametrize("levels", [[1.0, 2.0], [1.0, 1.0, 2.0], [0.0, 1.0, 2.0]])
def test_chained_bound_errors(levels):
    with pytest.raises(ValueError):
        chained_bound(levels, 1.0, 1.0, 1.0, 0.5, PowerLawSchedule(q=0.5), 0.5, 1.0)


def test_theta_moment_constant():
    assert theta_moment_constant(p=3.0, L=1.0, D_eta=1.0, delta=0.0, M1=1.0) == pytest.approx(40.0)
