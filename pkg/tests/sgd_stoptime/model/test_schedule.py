# Copyright 2025 The sgd_stoptime Authors

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sgd_stoptime.model.schedule import (
    ConstantSchedule,
    LogPowerLawSchedule,
    PowerLawSchedule,
    TableSchedule,
    schedule_from_dict,
)
from sgd_stoptime.types import Verdict


Y, N, U = Verdict.YES, Verdict.NO, Verdict.UNKNOWN


classify_cases = [
    (PowerLawSchedule(q=0.4), N, Y),
    (PowerLawSchedule(q=0.6), Y, Y),
    (PowerLawSchedule(q=1.0), Y, Y),
    (PowerLawSchedule(q=0.3), N, N),
    (PowerLawSchedule(q=1.2), N, N),
    (PowerLawSchedule(q=0.3, p_exponent=4.0), N, Y),
    (LogPowerLawSchedule(q=0.4), N, Y),
    (LogPowerLawSchedule(q=1.0), Y, Y),
    (ConstantSchedule(0.1), N, N),
    (TableSchedule([1.0, 0.5, 0.25]), U, U),
]


@pytest.mark.parametrize("schedule, robbins_monro, relaxed", classify_cases)
def test_classify(schedule, robbins_monro, relaxed):
    classification = schedule.classify()
    assert (classification.robbins_monro, classification.relaxed) == (robbins_monro, relaxed)
    assert len(classification.tests) == 3


def test_classification_text():
    assert str(PowerLawSchedule(q=0.4).classify()) == "RM: no, relaxed: yes"


@pytest.mark.parametrize("schedule, t, value",
                         [
                             (PowerLawSchedule(q=0.5), 4, 0.5),
                             (PowerLawSchedule(q=1.0, scale=2.0), 8, 0.25),
                             (ConstantSchedule(0.3), 1000, 0.3),
                             (TableSchedule([1.0, 0.5, 0.25]), 3, 0.25),
                         ])
def test_step_size(schedule, t, value):
    assert schedule.step_size(t) == value


def test_step_size_index_errors():
    with pytest.raises(ValueError):
        PowerLawSchedule(q=0.5).step_size(0)
    with pytest.raises(IndexError):
        TableSchedule([1.0, 0.5]).step_size(3)


@pytest.mark.parametrize("factory, args",
                         [
                             (PowerLawSchedule, {"q": 0.0}),
                             (PowerLawSchedule, {"q": 0.5, "scale": -1.0}),
                             (PowerLawSchedule, {"q": 0.5, "p_exponent": 2.0}),
                             (LogPowerLawSchedule, {"q": -0.1}),
                             (ConstantSchedule, {"value": 0.0}),
                             (TableSchedule, {"values": []}),
                             (TableSchedule, {"values": [0.5, 1.0]}),
                             (TableSchedule, {"values": [1.0, -0.5]}),
                         ])
def test_invalid_schedules(factory, args):
    with pytest.raises(ValueError):
        factory(**args)


def test_partial_sum_matches_loop():
    schedule = PowerLawSchedule(q=0.5)
    expected = 0.0
    for t in range(1, 11):
        expected += (1.0 / math.sqrt(t)) ** 3
    assert schedule.partial_sum(3.0, 10) == pytest.approx(expected, rel=1e-12)


def test_sigma_epsilon_and_m_of():
    schedule = ConstantSchedule(0.5)
    assert schedule.sigma_epsilon(0) == 0.0
    assert schedule.sigma_epsilon(4) == 2.0
    assert schedule.m_of(1.0) == 2
    assert schedule.m_of(1.2) == 2
    assert schedule.m_of(-1.0) == 0


def test_m_of_table_stops_at_length():
    assert TableSchedule([1.0, 0.5]).m_of(100.0) == 2


def test_tail_bound_power():
    assert PowerLawSchedule(q=0.5).tail_bound(3.0, 100) == pytest.approx(0.2, rel=1e-12)
    assert math.isinf(PowerLawSchedule(q=0.5).tail_bound(2.0, 100))


def test_tail_bound_bounds_the_tail():
    schedule = LogPowerLawSchedule(q=0.5)
    t = 1000
    tail = schedule.partial_sum(3.0, 200000) - schedule.partial_sum(3.0, t)
    assert schedule.tail_bound(3.0, t) >= tail


def test_table_has_no_tail():
    with pytest.raises(ValueError):
        TableSchedule([1.0]).tail_bound(3.0, 1)


def test_log_power_prefix_is_clamped():
    schedule = LogPowerLawSchedule(q=0.5)
    assert schedule.step_size(1) == schedule.step_size(5)
    assert schedule.step_size(8) < schedule.step_size(7)


@settings(max_examples=50, deadline=None)
@given(q=st.floats(min_value=0.05, max_value=2.0), scale=st.floats(min_value=0.01, max_value=10.0))
def test_power_law_is_positive_and_nonincreasing(q, scale):
    eps = PowerLawSchedule(q=q, scale=scale).step_sizes(1, 2000)
    assert np.all(eps > 0.0)
    assert np.all(np.diff(eps) <= 0.0)


@settings(max_examples=10, deadline=None)
@given(q=st.floats(min_value=0.2, max_value=2.0))
def test_log_power_law_is_positive_and_nonincreasing(q):
    eps = LogPowerLawSchedule(q=q).step_sizes(1, 5000)
    assert np.all(eps > 0.0)
    assert np.all(np.diff(eps) <= 0.0)


def test_schedule_from_dict():
    schedule = schedule_from_dict({"family": "power", "q": 0.4, "p": 3.0})
    assert isinstance(schedule, PowerLawSchedule)
    assert schedule.describe() == {"family": "power", "p": 3.0, "q": 0.4, "scale": 1.0}


@pytest.mark.parametrize("spec, exception",
                         [
                             ({"family": "cosine"}, KeyError),
                             ({"family": "power"}, ValueError),
                             ({"family": "power", "q": 0.4, "decay": 2}, ValueError),
                             ({"family": "constant", "value": 0.1, "p": 1.5}, ValueError),
                         ])
def test_schedule_from_dict_errors(spec, exception):
    with pytest.raises(exception):
        schedule_from_dict(spec)
