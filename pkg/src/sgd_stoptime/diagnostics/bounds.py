# Copyright 2025 The sgd_stoptime Authors

'''
Explicit constants of the convergence argument. All of them are plain arithmetic on
certified problem and oracle constants; the only numerical input is sum_t eps_t^p,
taken from the schedule's certified power_sum.
'''

import math

import numpy as np

import sgd_stoptime.logger as sglog
from sgd_stoptime.constants import POWER_SUM_HORIZON
from sgd_stoptime.model.schedule import StepSizeSchedule
from sgd_stoptime.types import Verdict


def compute_C_bar_nu(nu: float, D_eta: float, L: float, p: float) -> float:
    if not p > 2.0:
        raise ValueError(f"C_bar_nu needs p > 2, got {p}")
    if not nu > 0.0:
        raise ValueError(f"nu must be positive, got {nu}")
    ratio = 1.0 + D_eta / nu
    return ratio * L * (2.0 / p) * (4.0 * ratio * L * (1.0 - 2.0 / p) / nu) ** ((p - 2.0) / 2.0)


def compute_C_nu(nu: float, D_eta: float, L: float, p: float, M0: float, schedule: StepSizeSchedule,
                 horizon: int = POWER_SUM_HORIZON) -> float:
    '''
    C_nu = C_bar_nu * M_p * sum_t eps_t^p with M_p = M0^p
    '''
    relaxed = schedule.classify().relaxed
    if relaxed != Verdict.YES:
        raise ValueError(f"C_nu is only finite for relaxed schedules; {schedule!r} is relaxed={relaxed}")
    eps_sum = schedule.power_sum(p, horizon)
    if math.isinf(eps_sum):
        raise ValueError(f"sum eps^{p:g} is not finite for {schedule!r}")
    value = compute_C_bar_nu(nu, D_eta, L, p) * M0**p * eps_sum
    sglog.log(sglog.DEBUG, f"C_nu(nu={nu:g}) = {value:.6g} with sum eps^p <= {eps_sum:.6g}")
    return value


def compute_C1_C2(a: float, b: float, m: int, L: float, G: float, delta_ab: float,
                  schedule: StepSizeSchedule, C_half_gap: float) -> tuple[float, float]:
    if not 0.0 < a < b:
        raise ValueError(f"C1/C2 need 0 < a < b, got a={a}, b={b}")
    if not delta_ab > 0.0:
        raise ValueError(f"delta_ab must be positive, got {delta_ab}")
    gap = b - a
    inv_d2 = 1.0 / delta_ab**2
    C1 = ((3.0 * b * L / gap + L / 2.0) * (2.0 * G * inv_d2) + 12.0 * L * b**2 * G / gap**2) * (1.0 + inv_d2)
    eps1 = schedule.step_size(1)
    half = eps1 ** ((m - 1) / 2.0)
    C2 = (6.0 * a * b / gap) * half * (half + eps1 ** (m - 1)) * C_half_gap
    return C1, C2


def compute_C0(h1: float, h2: float, L: float, G: float, delta0: float) -> float:
    if not h1 < h2:
        raise ValueError(f"C0 needs h1 < h2, got h1={h1}, h2={h2}")
    if not delta0 > 0.0:
        raise ValueError(f"delta0 must be positive, got {delta0}")
    return 4.0 * G / ((h2 - h1) * delta0**2) + L**2 * h2 * G * (1.0 + 1.0 / delta0**2)


def upcrossing_bound(h1: float, h2: float, C_gap8: float, C0: float, gqv: float) -> float:
    '''
    bound on the expected number of up-crossings of (h1, h2); gqv is the gradient
    quadratic variation of order 1 on (h1, h2)
    '''
    gap = h2 - h1
    if not gap > 0.0:
        raise ValueError(f"upcrossing bound needs h1 < h2, got h1={h1}, h2={h2}")
    return 1.0 + 4.0 * C_gap8 / (3.0 * gap) + 4.0 * C0 / (3.0 * gap) * gqv


def chain_levels(a: float, c: float, p: float) -> np.ndarray:
    '''
    a, ceil(p) - 1 equally spaced interior levels, c
    '''
    if not a < c:
        raise ValueError(f"chain levels need a < c, got a={a}, c={c}")
    return np.linspace(a, c, math.ceil(p) + 1)


def chained_bound(levels, terminal: float, L: float, G: float, delta: float, schedule: StepSizeSchedule,
                  D_eta: float, M0: float) -> list[float]:
    '''
    Compose the recursion [grad f]^m on (b, c) <= C1(a, b) [grad f]^(m+1) on (a, b) + C2(m, a, b)
    from the lowest interval (order len(levels) - 1, value `terminal`) up to order 1 on the top
    interval. Returns the bounds ordered from the highest order down to order 1.
    '''
    levels = np.asarray(levels, dtype=np.float64)
    if len(levels) < 3 or np.any(np.diff(levels) <= 0.0) or levels[0] <= 0.0:
        raise ValueError(f"chained bound needs at least three increasing positive levels, got {levels.tolist()}")
    p = schedule.p_exponent
    top_order = len(levels) - 1
    bounds = [float(terminal)]
    for j in range(1, top_order):
        lo, hi = float(levels[j - 1]), float(levels[j])
        order = top_order - j
        C_half_gap = compute_C_nu((hi - lo) / 2.0, D_eta, L, p, M0, schedule)
        C1, C2 = compute_C1_C2(lo, hi, order, L, G, delta, schedule, C_half_gap)
        bounds.append(C1 * bounds[-1] + C2)
    return bounds


def theta_moment_constant(p: float, L: float, D_eta: float, delta: float, M1: float) -> float:
    '''
    bound on E || eps^-1 (grad f - g) ||^(2p-2) 1[S_delta]
    '''
    return 2.0 ** (2.0 * p - 3.0) * ((2.0 * L * (D_eta + delta)) ** (p - 1.0) + M1 ** (2.0 * p - 2.0))
