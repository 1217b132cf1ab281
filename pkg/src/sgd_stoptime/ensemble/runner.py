# Copyright 2025 The sgd_stoptime Authors

from joblib import Parallel, delayed

import sgd_stoptime.logger as sglog
from sgd_stoptime.core.engine import Trajectory
from sgd_stoptime.core.processing import DiagnosticsProcessor
from sgd_stoptime.core.setup import ExperimentSetup
from sgd_stoptime.diagnostics.report import DiagnosticResult, DiagnosticsReport
from sgd_stoptime.ensemble.stats import EnsembleStats
from sgd_stoptime.pipeline import EnsembleStatsContext, UpcrossingSaturationContext, collect_statistics, lookup_check


def _run_seed(setup: ExperimentSetup, seed: int) -> tuple[int, Trajectory | None, str | None]:
    # worker side: any error becomes a per-seed failure instead of stopping the ensemble
    try:
        return seed, setup.engine().run(setup.theta1(seed), setup.T, seed), None
    except (ArithmeticError, ValueError, RuntimeError) as err:
        return seed, None, f"{type(err).__name__}: {err}"


class EnsembleResult:
    def __init__(self, seeds: list[int], stats: EnsembleStats) -> None:
        self.seeds = list(seeds)
        self.stats = stats
        self.reports: dict[int, DiagnosticsReport] = {}
        self.failures: dict[int, str] = {}
        self.results: list[DiagnosticResult] = []
        self.final_values: dict[int, float] = {}
        self.trajectories: dict[int, Trajectory] = {}
        self.classification = None

    @property
    def diverged_fraction(self) -> float:
        return self.stats.diverged_count / len(self.seeds) if self.seeds else 0.0

    def failed_results(self) -> list[DiagnosticResult]:
        failed = [r for r in self.results if r.failed]
        for seed in sorted(self.reports):
            failed += self.reports[seed].failures()
        return failed

    def passed(self, max_divergence_fraction: float) -> bool:
        return (not self.failed_results()
                and not self.failures
                and self.diverged_fraction <= max_divergence_fraction)

    def exit_code(self, max_divergence_fraction: float) -> int:
        return 0 if self.passed(max_divergence_fraction) else 1


class EnsembleRunner:
    '''
    Runs seeds base_seed .. base_seed + n - 1 in a joblib work pool and folds every finished
    trajectory through the diagnostics processor in seed order.

    diagnostics is the config list [{"check": name, **params}, ...]. threads=0 uses every CPU.
    '''
    def __init__(self,
                 setup: ExperimentSetup,
                 diagnostics: list[dict] | None = None,
                 threads: int = 1,
                 keep_trajectories: bool = False) -> None:
        if threads < 0:
            raise ValueError(f"threads must be >= 0 (0 = one worker per CPU), got {threads}")
        self.setup = setup
        self.diagnostics = [dict(d) for d in (diagnostics or [])]
        self.threads = threads
        self.keep_trajectories = keep_trajectories

    def _build_processor(self, n: int) -> tuple[DiagnosticsProcessor, EnsembleStatsContext, list]:
        processor = DiagnosticsProcessor()
        stats_context = EnsembleStatsContext(self.setup, n)
        processor.register_stage(collect_statistics, stats_context)
        contexts = []
        for entry in self.diagnostics:
            params = dict(entry)
            check, context_cls = lookup_check(params.pop("check"))
            context = context_cls(self.setup, **params)
            processor.register_stage(check, context)
            contexts.append(context)
        return processor, stats_context, contexts

    def run(self, n: int, base_seed: int = 0) -> EnsembleResult:
        if n < 2:
            raise ValueError(f"Ensemble needs n >= 2 trajectories, got {n}")
        self.setup.oracle.consistency_check(self.setup.problem)
        seeds = list(range(base_seed, base_seed + n))
        processor, stats_context, contexts = self._build_processor(n)

        workers = "all CPUs" if self.threads == 0 else f"{self.threads} worker(s)"
        sglog.log(sglog.INFO, f"Running {n} trajectories of T={self.setup.T} on {workers}")
        reports = {}
        failures = {}
        finals = {}
        kept = {}
        jobs = Parallel(n_jobs=self.threads or -1, return_as="generator")(
            delayed(_run_seed)(self.setup, seed) for seed in seeds)
        for done, (seed, trajectory, error) in enumerate(jobs, start=1):
            if error is not None:
                sglog.log(sglog.ERROR, f"seed {seed}: {error}")
                failures[seed] = error
                continue
            reports[seed] = processor.process(trajectory)
            finals[seed] = trajectory.final_f
            if self.keep_trajectories:
                kept[seed] = trajectory
            if done % max(1, n // 10) == 0:
                sglog.log(sglog.INFO, f"{done}/{n} trajectories processed")

        ensemble_results = processor.drain()
        stats = stats_context.stats
        for context in contexts:
            if isinstance(context, UpcrossingSaturationContext):
                stats.upcross_saturation.update(context.saturation_table())

        result = EnsembleResult(seeds, stats)
        result.reports = reports
        result.failures = failures
        result.results = ensemble_results
        result.final_values = finals
        result.trajectories = kept
        result.classification = self.setup.schedule.classify()
        return result


def run_ensemble(config, n: int | None = None, base_seed: int | None = None, threads: int = 1) -> EnsembleResult:
    '''
    run the ensemble an ExperimentConfig describes; n and base_seed override the config
    '''
    runner = EnsembleRunner(config.build_setup(), config.diagnostics, threads, config.export_trajectories)
    return runner.run(config.n_trajectories if n is None else n,
                      config.base_seed if base_seed is None else base_seed)
