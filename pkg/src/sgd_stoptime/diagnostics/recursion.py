# Copyright 2025 The sgd_stoptime Authors

import math

import numpy as np

import sgd_stoptime.logger as sglog
from sgd_stoptime.constants import CONFIDENCE_Z
from sgd_stoptime.core.engine import Trajectory
from sgd_stoptime.diagnostics.bounds import compute_C1_C2, compute_C_nu
from sgd_stoptime.diagnostics.ladder import build_ladder, grad_quadratic_variation
from sgd_stoptime.diagnostics.report import DiagnosticResult, STATUS_INCONCLUSIVE
from sgd_stoptime.model.oracle import GradientOracle
from sgd_stoptime.model.problem import Problem
from sgd_stoptime.model.schedule import StepSizeSchedule


def mean_halfwidth(samples) -> tuple[float, float]:
    '''
    sample mean and its CONFIDENCE_Z * sd / sqrt(n) half-width (0 for a single sample)
    '''
    data = np.asarray(samples, dtype=np.float64)
    n = len(data)
    if n == 0:
        return math.nan, math.nan
    if n == 1:
        return float(data[0]), 0.0
    return float(np.mean(data)), float(CONFIDENCE_Z * np.std(data, ddof=1) / math.sqrt(n))


def estimate_delta_ab(trajectories: list[Trajectory], a: float, c: float) -> float:
    '''
    smallest recorded ||grad f|| over visited points with f - f* in [a, c); inf if none was visited
    '''
    smallest = math.inf
    for traj in trajectories:
        gap = traj.f_gap
        inside = (gap >= a) & (gap < c)
        if np.any(inside):
            smallest = min(smallest, float(np.min(traj.grad_norm[inside])))
    return smallest


class RecursiveTerms:
    '''
    per-trajectory ingredients of the recursive inequality; C1 and C2 are applied
    once the whole ensemble is known
    '''
    def __init__(self, seed: int, lhs: float, inner: float, delta_local: float, has_excursion: bool) -> None:
        self.seed = seed
        self.lhs = lhs
        self.inner = inner
        self.delta_local = delta_local
        self.has_excursion = has_excursion


def recursive_terms(trajectory: Trajectory, a: float, b: float, c: float, m: int) -> RecursiveTerms:
    upper = build_ladder(trajectory, b, c)
    lower = build_ladder(trajectory, a, b)
    has_excursion = any(True for _ in upper.excursions()) or any(True for _ in lower.excursions())
    return RecursiveTerms(trajectory.seed,
                          grad_quadratic_variation(trajectory, upper, m),
                          grad_quadratic_variation(trajectory, lower, m + 1),
                          estimate_delta_ab([trajectory], a, c),
                          has_excursion)


def recursive_inequality_from_terms(terms: list[RecursiveTerms],
                                    a: float, b: float, c: float, m: int,
                                    problem: Problem,
                                    oracle: GradientOracle,
                                    schedule: StepSizeSchedule,
                                    delta_ab: float | None = None,
                                    c_half_gap: float | None = None,
                                    c1_scale: float = 1.0) -> DiagnosticResult:
    params = {"a": a, "b": b, "c": c, "m": m, "c1_scale": c1_scale}
    if not terms:
        return DiagnosticResult.open("recursive_inequality", params, STATUS_INCONCLUSIVE,
                                     "no finite trajectory in the ensemble")
    if not any(term.has_excursion for term in terms):
        return DiagnosticResult.open("recursive_inequality", params, STATUS_INCONCLUSIVE,
                                     "no trajectory has an excursion on (a, b) or (b, c)")

    estimated = delta_ab is None
    if estimated:
        delta_ab = min(term.delta_local for term in terms)
        if not 0.0 < delta_ab < math.inf:
            return DiagnosticResult.open("recursive_inequality", params, STATUS_INCONCLUSIVE,
                                         f"delta_ab estimate {delta_ab} is not positive and finite")
    if c_half_gap is None:
        c_half_gap = compute_C_nu((b - a) / 2.0, problem.D_eta, problem.lipschitz_L, schedule.p_exponent,
                                  oracle.declared_M0, schedule)

    C1, C2 = compute_C1_C2(a, b, m, problem.lipschitz_L, oracle.declared_G, delta_ab, schedule, c_half_gap)
    C1 *= c1_scale

    inner = np.array([term.inner for term in terms])
    lhs_mean, lhs_hw = mean_halfwidth([term.lhs for term in terms])
    rhs_mean, rhs_hw = mean_halfwidth(C1 * inner + C2)
    combined = math.hypot(lhs_hw, rhs_hw)
    sglog.log(sglog.DEBUG, f"recursive inequality (a,b,c,m)=({a},{b},{c},{m}): "
                           f"{lhs_mean:.4g} <= {rhs_mean:.4g} + 2*{combined:.3g}")

    return DiagnosticResult("recursive_inequality", params,
                            value=lhs_mean,
                            tolerance=rhs_mean,
                            passed=lhs_mean <= rhs_mean + 2.0 * combined,
                            stderr_halfwidth=combined,
                            details={"C1": C1, "C2": C2, "delta_ab": delta_ab, "delta_ab_estimated": estimated,
                                     "C_half_gap": c_half_gap, "trajectories": len(terms),
                                     "lhs_halfwidth": lhs_hw, "rhs_halfwidth": rhs_hw})


def check_recursive_inequality(trajectories: list[Trajectory],
                               a: float, b: float, c: float, m: int,
                               problem: Problem,
                               oracle: GradientOracle,
                               schedule: StepSizeSchedule,
                               delta_ab: float | None = None,
                               c_half_gap: float | None = None,
                               c1_scale: float = 1.0) -> DiagnosticResult:
    '''
    Ensemble check of  E[grad f]^m on (b, c) <= C1(a, b) E[grad f]^(m+1) on (a, b) + C2(m, a, b).

    Passes when the left mean is below the right mean plus twice the combined half-width.
    c1_scale != 1 perturbs C1 and serves as a sensitivity control. Diverged trajectories
    are left out.
    '''
    if not 0.0 < a < b < c:
        raise ValueError(f"Recursive inequality needs 0 < a < b < c, got {a}, {b}, {c}")
    terms = [recursive_terms(t, a, b, c, m) for t in trajectories if not t.diverged]
    return recursive_inequality_from_terms(terms, a, b, c, m, problem, oracle, schedule,
                                           delta_ab, c_half_gap, c1_scale)
