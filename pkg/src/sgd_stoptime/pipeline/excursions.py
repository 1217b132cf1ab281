# Copyright 2025 The sgd_stoptime Authors

import math

import numpy as np

import sgd_stoptime.logger as sglog
from sgd_stoptime.core.engine import Trajectory
from sgd_stoptime.diagnostics.bounds import compute_C0, compute_C_nu, upcrossing_bound
from sgd_stoptime.diagnostics.ladder import build_ladder, grad_quadratic_variation, upcrossing_ladder_bound
from sgd_stoptime.diagnostics.recursion import estimate_delta_ab, recursive_inequality_from_terms, recursive_terms
from sgd_stoptime.diagnostics.report import DiagnosticResult, STATUS_INCONCLUSIVE, STATUS_NOT_EVALUABLE
from sgd_stoptime.diagnostics.residuals import truncated_increment_sum
from sgd_stoptime.diagnostics.upcrossing import Interval, count_upcrossings
from sgd_stoptime.ensemble.stats import mean_stderr
from sgd_stoptime.pipeline.context import AbstractContext, SeedTable
from sgd_stoptime.types import Verdict


def _require(params: dict, keys: tuple, check_name: str) -> None:
    missing = [k for k in keys if params.get(k) is None]
    if missing:
        raise ValueError(f"{check_name} requires parameters {missing}")


def _no_guarantee(check_name: str, params: dict, schedule) -> DiagnosticResult | None:
    verdict = schedule.classify()
    if verdict.relaxed != Verdict.YES:
        return DiagnosticResult.open(check_name, params, STATUS_NOT_EVALUABLE,
                                     f"no guarantee: schedule is relaxed={verdict.relaxed}",
                                     tests=verdict.tests)
    return None


class TruncatedIncrementContext(AbstractContext):
    '''
    E sum_t (1[f - f* < D_eta] |f(theta_{t+1}) - f(theta_t)| - nu)_+ is bounded by C_nu.
    '''
    defaults = {"nu": 0.1}

    def __init__(self, setup, **params) -> None:
        super().__init__(setup, **params)
        self.sums = SeedTable()

    def drain(self) -> list[DiagnosticResult]:
        setup = self.setup
        params = {"nu": self.params["nu"], "D_eta": setup.problem.D_eta}
        closed = _no_guarantee("truncated_increments", params, setup.schedule)
        if closed is not None:
            return [closed]
        if not len(self.sums):
            return [DiagnosticResult.open("truncated_increments", params, STATUS_INCONCLUSIVE,
                                          "no finite trajectory in the ensemble")]
        C_nu = compute_C_nu(float(self.params["nu"]), setup.problem.D_eta, setup.problem.lipschitz_L,
                            setup.schedule.p_exponent, setup.oracle.declared_M0, setup.schedule)
        mean, stderr = mean_stderr(self.sums.values())
        k = self.threshold("stderr_multiplier")
        return [DiagnosticResult("truncated_increments", params,
                                 value=mean,
                                 tolerance=C_nu,
                                 passed=mean <= C_nu + k * stderr,
                                 stderr_halfwidth=stderr,
                                 details={"trajectories": len(self.sums)})]


def truncated_increments(trajectory: Trajectory, context: TruncatedIncrementContext) -> list[DiagnosticResult]:
    context.sums.put(trajectory.seed,
                     truncated_increment_sum(trajectory, context.setup.problem, float(context.params["nu"])))
    return []


class RecursiveInequalityContext(AbstractContext):
    defaults = {"a": None, "b": None, "c": None, "m": 1, "delta_ab": None, "c_half_gap": None, "c1_scale": 1.0}

    def __init__(self, setup, **params) -> None:
        super().__init__(setup, **params)
        _require(self.params, ("a", "b", "c"), "recursive_inequality")
        if not 0.0 < self.params["a"] < self.params["b"] < self.params["c"]:
            raise ValueError(f"recursive_inequality needs 0 < a < b < c, got {self.params}")
        self.terms = SeedTable()

    def drain(self) -> list[DiagnosticResult]:
        setup = self.setup
        p = self.params
        if p["c_half_gap"] is None:
            closed = _no_guarantee("recursive_inequality", {k: p[k] for k in ("a", "b", "c", "m")}, setup.schedule)
            if closed is not None:
                return [closed]
        return [recursive_inequality_from_terms(self.terms.values(), p["a"], p["b"], p["c"], int(p["m"]),
                                                setup.problem, setup.oracle, setup.schedule,
                                                delta_ab=p["delta_ab"], c_half_gap=p["c_half_gap"],
                                                c1_scale=float(p["c1_scale"]))]


def recursive_inequality(trajectory: Trajectory, context: RecursiveInequalityContext) -> list[DiagnosticResult]:
    p = context.params
    context.terms.put(trajectory.seed, recursive_terms(trajectory, p["a"], p["b"], p["c"], int(p["m"])))
    return []


def _interval_key(interval: Interval) -> str:
    return f"({interval.e:g}, {interval.o:g})"


class UpcrossingSaturationContext(AbstractContext):
    '''
    Up-crossing counts of f - f* over (e, o) on [1, T/2] and [1, T]: a finite expected count
    shows as saturated trajectories that add no crossing in the second half.
    '''
    defaults = {"intervals": [[1.0, 2.0]]}

    def __init__(self, setup, **params) -> None:
        super().__init__(setup, **params)
        self.intervals = [Interval(e, o) for e, o in self.params["intervals"]]
        self.counts = SeedTable()

    def saturation_table(self) -> dict[str, dict]:
        table = {}
        if not len(self.counts):
            return table
        counts = np.asarray(self.counts.values())
        for j, interval in enumerate(self.intervals):
            half, full = counts[:, j, 0], counts[:, j, 1]
            table[_interval_key(interval)] = {
                "mean_half": float(np.mean(half)),
                "mean_full": float(np.mean(full)),
                "saturated_fraction": float(np.mean(full == half)),
            }
        return table

    def drain(self) -> list[DiagnosticResult]:
        params = {"intervals": [i.to_list() for i in self.intervals]}
        table = self.saturation_table()
        if not table:
            return [DiagnosticResult.open("upcrossing_saturation", params, STATUS_INCONCLUSIVE,
                                          "no finite trajectory in the ensemble")]
        required = self.threshold("saturation_fraction")
        worst = min(row["saturated_fraction"] for row in table.values())
        return [DiagnosticResult("upcrossing_saturation", params,
                                 value=worst,
                                 tolerance=required,
                                 passed=worst >= required,
                                 details={"intervals": table})]


def upcrossing_saturation(trajectory: Trajectory, context: UpcrossingSaturationContext) -> list[DiagnosticResult]:
    gap = trajectory.f_gap
    half = max(1, trajectory.T // 2)
    counts = []
    results = []
    for interval in context.intervals:
        counts.append((count_upcrossings(gap[:half], interval), count_upcrossings(gap, interval)))
        if math.isfinite(interval.o):
            bound = upcrossing_ladder_bound(gap, interval.e, interval.o)
            results.append(DiagnosticResult("upcrossing_ladder_bound",
                                            {"interval": interval.to_list(), "seed": trajectory.seed},
                                            value=counts[-1][1],
                                            tolerance=bound,
                                            passed=counts[-1][1] <= bound))
    context.counts.put(trajectory.seed, counts)
    return results


class UpcrossingBoundContext(AbstractContext):
    '''
    Mean up-crossing count of (h1, h2) against
    1 + 4 C_{(h2-h1)/8} / (3 (h2-h1)) + 4 C0 / (3 (h2-h1)) E[grad f]^1.
    '''
    defaults = {"h1": None, "h2": None, "delta0": None}

    def __init__(self, setup, **params) -> None:
        super().__init__(setup, **params)
        _require(self.params, ("h1", "h2"), "upcrossing_bound")
        self.interval = Interval(self.params["h1"], self.params["h2"])
        self.counts = SeedTable()
        self.gqv = SeedTable()
        self.delta_local = SeedTable()

    def drain(self) -> list[DiagnosticResult]:
        setup = self.setup
        h1, h2 = self.interval.e, self.interval.o
        params = {"h1": h1, "h2": h2}
        closed = _no_guarantee("upcrossing_bound", params, setup.schedule)
        if closed is not None:
            return [closed]
        if not len(self.counts):
            return [DiagnosticResult.open("upcrossing_bound", params, STATUS_INCONCLUSIVE,
                                          "no finite trajectory in the ensemble")]
        delta0 = self.params["delta0"]
        if delta0 is None:
            delta0 = min(self.delta_local.values())
            if not 0.0 < delta0 < math.inf:
                return [DiagnosticResult.open("upcrossing_bound", params, STATUS_INCONCLUSIVE,
                                              f"delta0 estimate {delta0} is not positive and finite")]
        problem, oracle, schedule = setup.problem, setup.oracle, setup.schedule
        C_gap8 = compute_C_nu((h2 - h1) / 8.0, problem.D_eta, problem.lipschitz_L, schedule.p_exponent,
                              oracle.declared_M0, schedule)
        C0 = compute_C0(h1, h2, problem.lipschitz_L, oracle.declared_G, delta0)
        bound = upcrossing_bound(h1, h2, C_gap8, C0, float(np.mean(self.gqv.values())))
        mean, stderr = mean_stderr(self.counts.values())
        sglog.log(sglog.DEBUG, f"upcrossings of ({h1:g}, {h2:g}): mean {mean:.4g} against bound {bound:.4g}")
        k = self.threshold("stderr_multiplier")
        return [DiagnosticResult("upcrossing_bound", params,
                                 value=mean,
                                 tolerance=bound,
                                 passed=mean <= bound + k * stderr,
                                 stderr_halfwidth=stderr,
                                 details={"C0": C0, "C_gap8": C_gap8, "delta0": delta0,
                                          "trajectories": len(self.counts)})]


def upcrossing_expectation(trajectory: Trajectory, context: UpcrossingBoundContext) -> list[DiagnosticResult]:
    h1, h2 = context.interval.e, context.interval.o
    context.counts.put(trajectory.seed, count_upcrossings(trajectory.f_gap, context.interval))
    context.gqv.put(trajectory.seed, grad_quadratic_variation(trajectory, build_ladder(trajectory, h1, h2), 1))
    context.delta_local.put(trajectory.seed, estimate_delta_ab([trajectory], h1, h2))
    return []
