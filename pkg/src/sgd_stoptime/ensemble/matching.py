# Copyright 2025 The sgd_stoptime Authors

import math

from sgd_stoptime.model.problem import Problem


def critical_value_match(final_values, problem: Problem, tolerance: float) -> tuple[float | None, list[float | None]]:
    '''
    Match each final f(theta) to the nearest certified critical value.

    Returns the matched fraction over the finite final values and, per trajectory, the matched
    critical value or None. Non-finite finals (diverged runs) are left out of the fraction.
    The fraction is None when the problem has no certified critical values.
    '''
    if not tolerance > 0.0:
        raise ValueError(f"Matching tolerance must be positive, got {tolerance}")
    values = [float(v) for v in final_values]
    if problem.critical_values is None:
        return None, [None] * len(values)

    matched: list[float | None] = []
    finite = 0
    hits = 0
    for v in values:
        if not math.isfinite(v):
            matched.append(None)
            continue
        finite += 1
        nearest = problem.nearest_critical_value(v)
        if nearest is not None and abs(v - nearest) <= tolerance:
            matched.append(nearest)
            hits += 1
        else:
            matched.append(None)
    return (hits / finite if finite else math.nan), matched
