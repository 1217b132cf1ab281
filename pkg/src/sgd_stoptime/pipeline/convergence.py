# Copyright 2025 The sgd_stoptime Authors

import math

import numpy as np

from sgd_stoptime.core.engine import Trajectory
from sgd_stoptime.diagnostics.report import DiagnosticResult, STATUS_INCONCLUSIVE
from sgd_stoptime.diagnostics.residuals import liminf_grad_proxy
from sgd_stoptime.ensemble.matching import critical_value_match
from sgd_stoptime.ensemble.stats import geometric_checkpoints
from sgd_stoptime.pipeline.context import AbstractContext, SeedTable


def _empty(check_name: str, params: dict) -> DiagnosticResult:
    return DiagnosticResult.open(check_name, params, STATUS_INCONCLUSIVE, "no finite trajectory in the ensemble")


def second_half(trajectory: Trajectory) -> slice:
    return slice(max(1, trajectory.T // 2) - 1, None)


class AsProxyContext(AbstractContext):
    '''
    Empirical a.s. proxy: a trajectory counts as converged when sup ||grad f|| over
    [T/2, T] is below as_grad_tol.
    '''
    def __init__(self, setup, **params) -> None:
        super().__init__(setup, **params)
        self.converged = SeedTable()

    def drain(self) -> list[DiagnosticResult]:
        params = {"grad_tol": self.threshold("as_grad_tol"), "label": "empirical a.s. proxy"}
        if not len(self.converged):
            return [_empty("as_proxy", params)]
        fraction = float(np.mean(self.converged.values()))
        required = self.threshold("as_fraction")
        return [DiagnosticResult("as_proxy", params, value=fraction, tolerance=required,
                                 passed=fraction >= required)]


def as_proxy(trajectory: Trajectory, context: AsProxyContext) -> list[DiagnosticResult]:
    tail = trajectory.grad_norm[second_half(trajectory)]
    context.converged.put(trajectory.seed, bool(np.max(tail) < context.threshold("as_grad_tol")))
    return []


class CriticalValueContext(AbstractContext):
    def __init__(self, setup, **params) -> None:
        super().__init__(setup, **params)
        self.finals = SeedTable()

    def drain(self) -> list[DiagnosticResult]:
        tolerance = self.threshold("critical_value_tol")
        params = {"tolerance": tolerance, "problem": self.setup.problem.name}
        fraction, matched = critical_value_match(self.finals.values(), self.setup.problem, tolerance)
        if fraction is None:
            return [DiagnosticResult.open("critical_value_match", params, STATUS_INCONCLUSIVE,
                                          f"{self.setup.problem.name} has no certified critical values")]
        if math.isnan(fraction):
            return [_empty("critical_value_match", params)]
        required = self.threshold("critical_value_fraction")
        hits = [v for v in matched if v is not None]
        return [DiagnosticResult("critical_value_match", params, value=fraction, tolerance=required,
                                 passed=fraction >= required,
                                 details={"matched_values": sorted(set(hits))})]


def final_value(trajectory: Trajectory, context: CriticalValueContext) -> list[DiagnosticResult]:
    context.finals.put(trajectory.seed, trajectory.final_f)
    return []


class GradTrendContext(AbstractContext):
    '''
    Mean ||grad f||^2 at geometric checkpoints: the last checkpoint must be below the first
    one and below final_mean_grad_sq, and the log-log least-squares slope over the last three
    checkpoints must be negative. A slope that cannot be fitted leaves the check inconclusive.
    '''
    def __init__(self, setup, **params) -> None:
        super().__init__(setup, **params)
        self.checkpoints = geometric_checkpoints(setup.T)
        self.grad_sq = SeedTable()

    def drain(self) -> list[DiagnosticResult]:
        limit = self.threshold("final_mean_grad_sq")
        params = {"checkpoints": self.checkpoints, "final_limit": limit}
        if not len(self.grad_sq):
            return [_empty("grad_trend", params)]
        means = np.mean(np.asarray(self.grad_sq.values()), axis=0)
        tail = slice(-3, None)
        slope = math.nan
        if len(means) >= 3 and np.all(means[tail] > 0.0):
            slope = float(np.polyfit(np.log(self.checkpoints[tail]), np.log(means[tail]), 1)[0])
        return [DiagnosticResult("grad_trend", params,
                                 value=float(means[-1]),
                                 tolerance=limit,
                                 passed=None if math.isnan(slope) else bool(
                                     means[-1] < means[0] and means[-1] <= limit and slope < 0.0),
                                 details={"means": means, "log_log_slope": slope})]


def grad_trend(trajectory: Trajectory, context: GradTrendContext) -> list[DiagnosticResult]:
    context.grad_sq.put(trajectory.seed, trajectory.grad_norm[np.asarray(context.checkpoints) - 1] ** 2)
    return []


class SupGradStabilityContext(AbstractContext):
    '''
    E sup_t ||grad f||^2 is finite: the ensemble mean over [1, T] must stay within a
    relative sup_grad_stability of the one over [1, T/2].
    '''
    def __init__(self, setup, **params) -> None:
        super().__init__(setup, **params)
        self.sups = SeedTable()

    def drain(self) -> list[DiagnosticResult]:
        tolerance = self.threshold("sup_grad_stability")
        params = {"tolerance": tolerance}
        if not len(self.sups):
            return [_empty("sup_grad_stability", params)]
        half, full = np.mean(np.asarray(self.sups.values()), axis=0)
        if full == half:
            change = 0.0
        else:
            change = abs(full - half) / half if half > 0.0 else math.inf
        return [DiagnosticResult("sup_grad_stability", params, value=change, tolerance=tolerance,
                                 passed=change < tolerance,
                                 details={"mean_sup_half": half, "mean_sup_full": full})]


def sup_grad_stability(trajectory: Trajectory, context: SupGradStabilityContext) -> list[DiagnosticResult]:
    grad_sq = trajectory.grad_norm**2
    half = max(1, trajectory.T // 2)
    context.sups.put(trajectory.seed, (float(np.max(grad_sq[:half])), float(np.max(grad_sq))))
    return []


class LiminfProxyContext(AbstractContext):
    '''
    liminf ||grad f|| = 0, proxied by the ensemble mean of the running minimum of ||grad f|| at T.
    '''
    def __init__(self, setup, **params) -> None:
        super().__init__(setup, **params)
        self.minima = SeedTable()

    def drain(self) -> list[DiagnosticResult]:
        tolerance = self.threshold("liminf_grad_tol")
        params = {"tolerance": tolerance}
        if not len(self.minima):
            return [_empty("liminf_proxy", params)]
        mean = float(np.mean(self.minima.values()))
        return [DiagnosticResult("liminf_proxy", params, value=mean, tolerance=tolerance,
                                 passed=mean <= tolerance)]


def liminf_proxy(trajectory: Trajectory, context: LiminfProxyContext) -> list[DiagnosticResult]:
    context.minima.put(trajectory.seed, float(liminf_grad_proxy(trajectory)[-1]))
    return []
