# Copyright 2025 The sgd_stoptime Authors

import numpy as np

from sgd_stoptime.core.engine import Trajectory
from sgd_stoptime.diagnostics.report import DiagnosticResult
from sgd_stoptime.ensemble.stats import EnsembleStats, geometric_checkpoints, mean_stderr
from sgd_stoptime.pipeline.context import AbstractContext, SeedTable
from sgd_stoptime.types import DiagnosticWarning


class EnsembleStatsContext(AbstractContext):
    '''
    Checkpoint statistics of the whole ensemble. Always registered; diverged
    trajectories are only counted.
    '''
    accepts_diverged = True

    def __init__(self, setup, n_trajectories: int) -> None:
        super().__init__(setup,
                         warnings=[DiagnosticWarning("diverged", "Diverged trajectories: {d[count]} "
                                                     "(earliest after step {d[earliest]})",
                                                     {"count": 0, "earliest": setup.T},
                                                     {"earliest": min})])
        self.n_trajectories = n_trajectories
        self.checkpoints = geometric_checkpoints(setup.T)
        self.rows = SeedTable()
        self.diverged = SeedTable()
        self.stats: EnsembleStats | None = None

    def add(self, trajectory: Trajectory) -> None:
        if trajectory.diverged:
            self.diverged.put(trajectory.seed, trajectory.last_finite_step)
            self.issue_warning("diverged", {"count": 1, "earliest": trajectory.last_finite_step})
            return
        idx = np.asarray(self.checkpoints) - 1
        tol = self.threshold("as_grad_tol")
        window_sup = np.array([np.max(trajectory.grad_norm[max(1, -(-t // 2)) - 1:t]) for t in self.checkpoints])
        half = max(1, trajectory.T // 2)
        grad_sq = trajectory.grad_norm**2
        self.rows.put(trajectory.seed, {
            "grad_sq": grad_sq[idx],
            "f_gap": trajectory.f_gap[idx],
            "as_flag": window_sup < tol,
            "mart_inc": trajectory.mart_inc[idx],
            "sup_full": float(np.max(grad_sq)),
            "sup_half": float(np.max(grad_sq[:half])),
            "min_grad": float(np.min(trajectory.grad_norm)),
            "as_converged": bool(np.max(trajectory.grad_norm[half - 1:]) < tol),
        })

    def drain(self) -> list[DiagnosticResult]:
        stats = EnsembleStats(self.n_trajectories, self.checkpoints)
        stats.diverged_count = len(self.diverged)
        rows = self.rows.values()
        if rows:
            def column(key):
                return np.asarray([r[key] for r in rows])

            grad_sq = column("grad_sq")
            mart = column("mart_inc")
            for j in range(len(self.checkpoints)):
                mean, stderr = mean_stderr(grad_sq[:, j])
                stats.mean_grad_sq.append(mean)
                stats.grad_sq_stderr.append(stderr)
                mean, stderr = mean_stderr(mart[:, j])
                stats.mean_mart_inc.append(mean)
                stats.mart_inc_stderr.append(stderr)
            stats.median_f_gap = [float(v) for v in np.median(column("f_gap"), axis=0)]
            stats.as_fraction = [float(v) for v in np.mean(column("as_flag"), axis=0)]
            stats.as_converged_fraction = float(np.mean(column("as_converged")))
            stats.sup_grad_sq_mean = float(np.mean(column("sup_full")))
            stats.sup_grad_sq_half_mean = float(np.mean(column("sup_half")))
            stats.min_grad_norm_mean = float(np.mean(column("min_grad")))
        else:
            nan = [float("nan")] * len(self.checkpoints)
            stats.mean_grad_sq, stats.grad_sq_stderr = list(nan), list(nan)
            stats.median_f_gap, stats.as_fraction = list(nan), list(nan)
            stats.mean_mart_inc, stats.mart_inc_stderr = list(nan), list(nan)
        self.stats = stats
        return []


def collect_statistics(trajectory: Trajectory, context: EnsembleStatsContext) -> list[DiagnosticResult]:
    context.add(trajectory)
    return []
