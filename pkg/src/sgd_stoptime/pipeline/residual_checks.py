# Copyright 2025 The sgd_stoptime Authors

import numpy as np

import sgd_stoptime.logger as sglog
from sgd_stoptime.constants import RESIDUAL_REL_TOL
from sgd_stoptime.core.engine import Trajectory
from sgd_stoptime.diagnostics.report import DiagnosticResult, STATUS_INCONCLUSIVE
from sgd_stoptime.diagnostics.residuals import descent_residuals, indicator_descent_check, loss_bound_check
from sgd_stoptime.ensemble.stats import mean_stderr
from sgd_stoptime.model.oracle import make_stream
from sgd_stoptime.model.problem import BoxSampler, UnitBallSampler, check_assumption_31
from sgd_stoptime.pipeline.context import AbstractContext, SeedTable
from sgd_stoptime.types import DiagnosticWarning


def _no_trajectories(check_name: str, params: dict) -> DiagnosticResult:
    return DiagnosticResult.open(check_name, params, STATUS_INCONCLUSIVE, "no finite trajectory in the ensemble")


class DescentResidualContext(AbstractContext):
    '''
    Collects the per-step descent residual maxima. The descent inequality is deterministic given
    the sampled g_t, so any seed above tolerance fails the ensemble result.
    '''
    def __init__(self, setup, **params) -> None:
        super().__init__(setup,
                         warnings=[DiagnosticWarning("descent", "Descent residual above tolerance in {d[count]} "
                                                     "trajectories", {"count": 0})],
                         **params)
        self.maxima = SeedTable()
        self.counts = SeedTable()

    def drain(self) -> list[DiagnosticResult]:
        params = {"L": self.setup.problem.lipschitz_L, "trajectories": len(self.maxima)}
        if not len(self.maxima):
            return [_no_trajectories("descent_residuals", params)]
        failing = [s for s, c in zip(self.counts.seeds(), self.counts.values()) if c > 0]
        return [DiagnosticResult("descent_residuals", params,
                                 value=max(self.maxima.values()),
                                 tolerance=RESIDUAL_REL_TOL,
                                 passed=not failing,
                                 details={"failing_seeds": failing})]


def descent_residual_check(trajectory: Trajectory, context: DescentResidualContext) -> list[DiagnosticResult]:
    result = descent_residuals(trajectory, context.setup.problem)
    context.maxima.put(trajectory.seed, result.value)
    context.counts.put(trajectory.seed, result.details["count_above_tolerance"])
    if result.failed:
        context.issue_warning("descent")
    return [result]


class IndicatorDescentContext(AbstractContext):
    '''
    Realized residuals must hold per seed; the bounded residual sums only in expectation,
    judged by the ensemble mean against stderr_multiplier standard errors.
    '''
    defaults = {"y": 1.0, "m": 1}

    def __init__(self, setup, **params) -> None:
        super().__init__(setup, **params)
        if not self.params["y"] > 0.0 or self.params["m"] < 1:
            raise ValueError(f"indicator_descent needs y > 0 and m >= 1, got {self.params}")
        self.bounded = SeedTable()
        self.realized_ok = SeedTable()

    def drain(self) -> list[DiagnosticResult]:
        params = dict(self.params, G=self.setup.oracle.declared_G)
        if not len(self.bounded):
            return [_no_trajectories("indicator_descent", params)]
        mean, stderr = mean_stderr(self.bounded.values())
        k = self.threshold("stderr_multiplier")
        realized_failures = [s for s, ok in zip(self.realized_ok.seeds(), self.realized_ok.values()) if not ok]
        return [DiagnosticResult("indicator_descent", params,
                                 value=mean,
                                 tolerance=k * stderr,
                                 passed=not realized_failures and mean <= k * stderr,
                                 stderr_halfwidth=stderr,
                                 details={"realized_failing_seeds": realized_failures,
                                          "trajectories": len(self.bounded)})]


def indicator_descent(trajectory: Trajectory, context: IndicatorDescentContext) -> list[DiagnosticResult]:
    result = indicator_descent_check(trajectory, context.setup.problem, float(context.params["y"]),
                                     int(context.params["m"]), context.setup.oracle.declared_G)
    context.bounded.put(trajectory.seed, result.details["bounded_sum"])
    context.realized_ok.put(trajectory.seed, result.passed)
    return [result]


class LossBoundContext(AbstractContext):
    '''
    ||grad f||^2 <= 2 L (f - f*) on sampled box points plus the final iterates of the ensemble.
    '''
    defaults = {"n_points": 10000, "half_width": 3.0, "seed": 0, "include_final_points": True}

    def __init__(self, setup, **params) -> None:
        super().__init__(setup, **params)
        self.final_points = SeedTable()

    def drain(self) -> list[DiagnosticResult]:
        problem = self.setup.problem
        points = BoxSampler(float(self.params["half_width"]))(make_stream(int(self.params["seed"]), 0),
                                                               int(self.params["n_points"]), problem.dimension)
        if self.params["include_final_points"] and len(self.final_points):
            points = np.concatenate([points, np.asarray(self.final_points.values())])
        return [loss_bound_check(problem, points)]


def loss_bound_points(trajectory: Trajectory, context: LossBoundContext) -> list[DiagnosticResult]:
    if trajectory.final_point is not None:
        context.final_points.put(trajectory.seed, trajectory.final_point)
    return []


class AssumptionContext(AbstractContext):
    '''
    Sampled certificate of the problem (lower bound, Lipschitz gradient, coercivity probe,
    eta/D_eta level bound). Independent of the trajectories.
    '''
    defaults = {"n_samples": 2000, "radius": 10.0, "seed": 0}

    def drain(self) -> list[DiagnosticResult]:
        problem = self.setup.problem
        report = check_assumption_31(problem, UnitBallSampler(float(self.params["radius"])),
                                     int(self.params["n_samples"]), int(self.params["seed"]))
        if not report.passed:
            sglog.log(sglog.WARN, f"{problem.name}: assumption certificate failed "
                                  f"{[c for c, ok in report.results.items() if not ok]}")
        return [DiagnosticResult("assumption_31", dict(self.params, problem=problem.name),
                                 value=report.max_lipschitz_ratio,
                                 tolerance=problem.lipschitz_L,
                                 passed=report.passed,
                                 details=report.to_dict())]


def assumption_certificate(trajectory: Trajectory, context: AssumptionContext) -> list[DiagnosticResult]:
    return []
