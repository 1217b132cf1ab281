# Copyright 2025 The sgd_stoptime Authors

import math

import numpy as np

from sgd_stoptime.core.engine import Trajectory
from sgd_stoptime.diagnostics.report import DiagnosticResult, STATUS_INCONCLUSIVE, STATUS_NOT_EVALUABLE
from sgd_stoptime.diagnostics.residuals import martingale_window_sup, s_delta_flags
from sgd_stoptime.ensemble.stats import geometric_checkpoints, mean_stderr
from sgd_stoptime.pipeline.context import AbstractContext, SeedTable
from sgd_stoptime.types import DiagnosticWarning


def z_score(mean: float, stderr: float) -> float:
    if stderr > 0.0:
        return mean / stderr
    return 0.0 if mean == 0.0 else math.inf


class MartingaleMeanContext(AbstractContext):
    '''
    The increments M_t = eps_t grad f(theta_t)^T (grad f(theta_t) - g_t) are conditionally mean zero:
    at every checkpoint t their ensemble mean must lie within martingale_z standard errors of 0.
    '''
    def __init__(self, setup, **params) -> None:
        super().__init__(setup, **params)
        self.checkpoints = geometric_checkpoints(setup.T)
        self.increments = SeedTable()

    def drain(self) -> list[DiagnosticResult]:
        params = {"checkpoints": len(self.checkpoints), "trajectories": len(self.increments)}
        if len(self.increments) < 2:
            return [DiagnosticResult.open("martingale_mean", params, STATUS_INCONCLUSIVE,
                                          "fewer than two finite trajectories")]
        table = np.asarray(self.increments.values())
        stats = [mean_stderr(table[:, j]) for j in range(len(self.checkpoints))]
        z = np.array([z_score(m, s) for m, s in stats])
        limit = self.threshold("martingale_z")
        worst = int(np.argmax(np.abs(z)))
        return [DiagnosticResult("martingale_mean", params,
                                 value=float(abs(z[worst])),
                                 tolerance=limit,
                                 passed=bool(np.all(np.abs(z) <= limit)),
                                 details={"worst_checkpoint": self.checkpoints[worst],
                                          "checkpoints": self.checkpoints,
                                          "means": [m for m, _ in stats],
                                          "stderrs": [s for _, s in stats],
                                          "z": z})]


def martingale_increments(trajectory: Trajectory, context: MartingaleMeanContext) -> list[DiagnosticResult]:
    context.increments.put(trajectory.seed, trajectory.mart_inc[np.asarray(context.checkpoints) - 1])
    return []


class MartingaleWindowContext(AbstractContext):
    '''
    Windowed noise supremum Theta_t over S_delta visits; its per-time median across the
    ensemble must strictly decrease across the window start times. Needs the noise vector records.
    '''
    defaults = {"T_window": 1.0, "times": [1000, 10000, 100000]}

    def __init__(self, setup, **params) -> None:
        super().__init__(setup,
                         warnings=[DiagnosticWarning("missing_noise", "Noise records missing in {d[count]} "
                                                     "trajectories; set record_policy.keep_noise", {"count": 0})],
                         **params)
        self.times = sorted(int(t) for t in self.params["times"] if 1 <= int(t) <= setup.T)
        self.sups = SeedTable()
        self.missing = 0

    def drain(self) -> list[DiagnosticResult]:
        params = {"T_window": self.params["T_window"], "times": self.times}
        if self.setup.problem.critical_values is None:
            return [DiagnosticResult.open("martingale_window", params, STATUS_NOT_EVALUABLE,
                                          f"{self.setup.problem.name} has no certified critical values")]
        if self.missing:
            return [DiagnosticResult.open("martingale_window", params, STATUS_NOT_EVALUABLE,
                                          f"{self.missing} trajectories have no noise records; "
                                          "enable record_policy.keep_noise")]
        if len(self.times) < 2 or not len(self.sups):
            return [DiagnosticResult.open("martingale_window", params, STATUS_INCONCLUSIVE,
                                          "need at least two window start times within T and one trajectory")]
        medians = np.median(np.asarray(self.sups.values()), axis=0)
        if np.all(medians == 0.0):
            return [DiagnosticResult.open("martingale_window", params, STATUS_INCONCLUSIVE,
                                          "no trajectory visited S_delta inside the windows")]
        shrinking = bool(np.all(np.diff(medians) < 0.0))
        return [DiagnosticResult("martingale_window", params,
                                 value=float(medians[-1]),
                                 tolerance=float(medians[0]),
                                 passed=shrinking,
                                 details={"medians": medians})]


def martingale_window(trajectory: Trajectory, context: MartingaleWindowContext) -> list[DiagnosticResult]:
    problem = context.setup.problem
    if problem.critical_values is None or not context.times:
        return []
    if trajectory.noise is None:
        context.missing += 1
        context.issue_warning("missing_noise")
        return []
    flags = s_delta_flags(trajectory, problem.critical_values, context.setup.oracle.declared_delta)
    context.sups.put(trajectory.seed,
                     [martingale_window_sup(trajectory, t, float(context.params["T_window"]),
                                            context.setup.schedule, flags)
                      for t in context.times])
    return []
