# Copyright 2025 The sgd_stoptime Authors

import numpy as np

from sgd_stoptime.constants import RESIDUAL_REL_TOL
from sgd_stoptime.core.engine import Trajectory
from sgd_stoptime.diagnostics.report import DiagnosticResult
from sgd_stoptime.model.problem import Problem
from sgd_stoptime.model.schedule import StepSizeSchedule


def _paired(trajectory: Trajectory) -> tuple[int, np.ndarray]:
    '''
    number of steps with a known successor value and f(theta_{t+1}) - f(theta_t) for them
    '''
    path = trajectory.f_path()
    n = len(path) - 1
    return n, np.diff(path)


def descent_residual_series(trajectory: Trajectory, lipschitz_L: float) -> np.ndarray:
    '''
    rho_t = (f(theta_{t+1}) - f(theta_t)) + eps_t ||grad f||^2 - M_t - (L/2) eps_t^2 ||g_t||^2
    '''
    n, delta_f = _paired(trajectory)
    eps = trajectory.eps[:n]
    return (delta_f
            + eps * trajectory.grad_norm[:n] ** 2
            - trajectory.mart_inc[:n]
            - 0.5 * lipschitz_L * eps**2 * trajectory.g_norm_sq[:n])


def descent_residuals(trajectory: Trajectory, problem: Problem) -> DiagnosticResult:
    rho = descent_residual_series(trajectory, problem.lipschitz_L)
    n = len(rho)
    tolerance = RESIDUAL_REL_TOL * (1.0 + np.abs(trajectory.f[:n]))
    above = int(np.count_nonzero(rho > tolerance))
    return DiagnosticResult("descent_residuals",
                            {"L": problem.lipschitz_L, "seed": trajectory.seed},
                            value=float(np.max(rho)) if n else 0.0,
                            tolerance=RESIDUAL_REL_TOL,
                            passed=above == 0,
                            details={"count_above_tolerance": above, "steps": n})


def truncated_increment_sum(trajectory: Trajectory, problem: Problem, nu: float, D_eta: float | None = None) -> float:
    '''
    sum_t ( 1[f(theta_t) - f* < D_eta] |f(theta_{t+1}) - f(theta_t)| - nu )_+
    '''
    if not nu > 0.0:
        raise ValueError(f"nu must be positive, got {nu}")
    D_eta = problem.D_eta if D_eta is None else D_eta
    n, delta_f = _paired(trajectory)
    inside = (trajectory.f[:n] - trajectory.f_star) < D_eta
    return float(np.sum(np.maximum(np.where(inside, np.abs(delta_f), 0.0) - nu, 0.0)))


def loss_bound_check(problem: Problem, points) -> DiagnosticResult:
    '''
    max over points of ||grad f||^2 - 2 L (f - f*); passes when every point is within
    the relative tolerance of 2 L (f - f*)
    '''
    batch = problem._as_batch(points)
    grads = problem.gradients(batch)
    bound = 2.0 * problem.lipschitz_L * (problem.values(batch) - problem.f_star)
    violation = np.sum(grads**2, axis=1) - bound
    worst = int(np.argmax(violation))
    ok = violation <= RESIDUAL_REL_TOL * (1.0 + np.abs(bound))
    return DiagnosticResult("loss_bound",
                            {"problem": problem.name, "points": len(batch), "L": problem.lipschitz_L},
                            value=float(violation[worst]),
                            tolerance=RESIDUAL_REL_TOL,
                            passed=bool(np.all(ok)),
                            details={"violations": int(np.count_nonzero(~ok)), "worst_point": batch[worst]})


def indicator_descent_series(trajectory: Trajectory, problem: Problem, y: float, m: int,
                             G: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    '''
    Per-step residuals of the indicator descent inequality on steps with ||grad f||^2 >= y.

    realized: eps^m |grad|^2 + eps^(m-1) Delta_f - eps^(m-1) M_t - (L/2) eps^(m+1) ||g_t||^2
    bounded:  same with (L G / 2)(1 + 1/y) eps^(m+1) |grad|^2 as the last term
    with Delta_f = f(theta_{t+1}) - f(theta_t). realized <= 0 holds per step,
    bounded <= 0 only in expectation.
    '''
    if not y > 0.0:
        raise ValueError(f"y must be positive, got {y}")
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    n, delta_f = _paired(trajectory)
    eps = trajectory.eps[:n]
    grad_sq = trajectory.grad_norm[:n] ** 2
    active = grad_sq >= y
    L = problem.lipschitz_L
    common = eps**m * grad_sq + eps ** (m - 1) * delta_f - eps ** (m - 1) * trajectory.mart_inc[:n]
    realized = np.where(active, common - 0.5 * L * eps ** (m + 1) * trajectory.g_norm_sq[:n], 0.0)
    bounded = np.where(active, common - 0.5 * L * G * (1.0 + 1.0 / y) * eps ** (m + 1) * grad_sq, 0.0)
    return realized, bounded, active


def indicator_descent_check(trajectory: Trajectory, problem: Problem, y: float, m: int,
                            G: float = 1.0) -> DiagnosticResult:
    realized, bounded, active = indicator_descent_series(trajectory, problem, y, m, G)
    n = len(realized)
    tolerance = RESIDUAL_REL_TOL * (1.0 + np.abs(trajectory.f[:n])) * trajectory.eps[:n] ** (m - 1)
    above = int(np.count_nonzero(realized > tolerance))
    return DiagnosticResult("indicator_descent",
                            {"y": y, "m": m, "G": G, "seed": trajectory.seed},
                            value=float(np.max(realized)) if n else 0.0,
                            tolerance=RESIDUAL_REL_TOL,
                            passed=above == 0,
                            details={"count_above_tolerance": above,
                                     "active_steps": int(np.count_nonzero(active)),
                                     "bounded_sum": float(np.sum(bounded))})


def s_delta_flags(trajectory: Trajectory, critical_values, delta: float) -> np.ndarray:
    '''
    theta_t in S_delta: f(theta_t) lies within delta of a certified critical value
    '''
    if critical_values is None:
        raise ValueError("S_delta needs certified critical values")
    cvals = np.asarray(critical_values, dtype=np.float64)
    return np.min(np.abs(trajectory.f[:, None] - cvals[None, :]), axis=1) < delta


def martingale_window_sup(trajectory: Trajectory, t: int, T_window: float, schedule: StepSizeSchedule,
                          flags: np.ndarray) -> float:
    '''
    Theta_t = max over k in [t, m(Sigma(t) + T_window)] of
              || sum_{i=t..k} 1[theta_i in S_delta] eps_i (grad f(theta_i) - g_i) ||^(2p-2)
    The window is cut at the end of the record.
    '''
    noise = trajectory.require_vectors("noise")
    if not 1 <= t <= trajectory.n_steps:
        raise ValueError(f"Window start t={t} must lie in [1, {trajectory.n_steps}]")
    if not T_window > 0.0:
        raise ValueError(f"T_window must be positive, got {T_window}")
    end = max(t, min(schedule.m_of(schedule.sigma_epsilon(t) + T_window), trajectory.n_steps))
    weights = (np.asarray(flags[t - 1:end], dtype=np.float64) * trajectory.eps[t - 1:end])[:, None]
    partial = np.cumsum(weights * noise[t - 1:end], axis=0)
    exponent = 2.0 * schedule.p_exponent - 2.0
    return float(np.max(np.linalg.norm(partial, axis=1)) ** exponent)


def liminf_grad_proxy(trajectory: Trajectory) -> np.ndarray:
    '''
    running minimum of ||grad f(theta_t)||
    '''
    return np.minimum.accumulate(trajectory.grad_norm)
