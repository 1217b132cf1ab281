# Copyright 2025 The sgd_stoptime Authors

import numpy as np

import sgd_stoptime.logger as sglog
import sgd_stoptime.pipeline.context as procCTX

from sgd_stoptime.constants import RESIDUAL_REL_TOL
from sgd_stoptime.core.engine import Trajectory
from sgd_stoptime.diagnostics.report import DiagnosticResult, DiagnosticsReport, STATUS_NOT_EVALUABLE


class DiagnosticsProcessor:

    '''
    Main diagnostics processor:

      1. every finished trajectory passes through the registered check functions in
         registration order; each returns its per-seed results and folds what the
         ensemble verdict needs into its context
      2. drain() walks the contexts in the same order and collects the ensemble-level results

    Diverged trajectories only reach the sanity check and contexts that accept them.
    '''
    def __init__(self) -> None:
        self.stages = []
        self.stages.append((DiagnosticsProcessor.sanity_check, None, {}))
        self.trajectory_count = 0

    def __del__(self) -> None:
        sglog.log(sglog.DEBUG, "Processed trajectories: ", self.trajectory_count)

    '''
    Check functions are required to take
       * a single trajectory
       * a context object for the ensemble state (see pipeline/context.py)
       * optionally a dictionary of k/v arguments given at registration
    '''
    def register_stage(self, callback, context: procCTX.AbstractContext = None, **kwargs):
        sglog.log(sglog.DEBUG, "registering: ", callback.__name__)
        if context:
            context.enable()
        self.stages.append((callback, context, kwargs))

    '''
    Basic sanity check of a trajectory: consistent record lengths and f above f*.
    A diverged trajectory gets a not-evaluable divergence entry.
    '''
    @staticmethod
    def sanity_check(trajectory: Trajectory, _: procCTX.AbstractContext) -> list[DiagnosticResult]:
        params = {"seed": trajectory.seed}
        if trajectory.diverged:
            return [DiagnosticResult.open("divergence", params, STATUS_NOT_EVALUABLE,
                                          f"trajectory diverged after step {trajectory.last_finite_step}",
                                          last_finite_step=trajectory.last_finite_step)]
        if trajectory.n_steps != trajectory.T:
            sglog.log(sglog.ERROR, f"seed {trajectory.seed}: {trajectory.n_steps} records for T={trajectory.T}")
        below = int(np.count_nonzero(trajectory.f_gap < -RESIDUAL_REL_TOL * (1.0 + abs(trajectory.f_star))))
        if below:
            return [DiagnosticResult("lower_bound_records", params, value=below, tolerance=0, passed=False)]
        return []

    def process(self, trajectory: Trajectory) -> DiagnosticsReport:
        sglog.log(sglog.DEBUG, "Processing trajectory of seed", trajectory.seed)
        report = DiagnosticsReport(trajectory.seed)
        for check, context, keyword_dictionary in self.stages:
            if trajectory.diverged and check is not DiagnosticsProcessor.sanity_check \
                    and not (context and context.accepts_diverged):
                continue
            sglog.log(sglog.TRACE, "Check: ", check.__name__, "for seed", trajectory.seed)
            if keyword_dictionary:
                report.extend(check(trajectory, context, keyword_dictionary))
            else:
                report.extend(check(trajectory, context))
        self.trajectory_count += 1
        return report

    def drain(self) -> list[DiagnosticResult]:
        results = []
        while len(self.stages) > 0:
            # remove the first stage and collect whatever its context accumulated
            _, drain_context, _ = self.stages.pop(0)
            if not drain_context:
                continue
            sglog.log(sglog.DEBUG, "Draining check context:", type(drain_context).__name__)
            results += drain_context.drain()
            drain_context.print_warnings()
            # printed once here, not again when the context is collected
            drain_context._disable_warnings()
        return results
