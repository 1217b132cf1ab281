# Copyright 2025 The sgd_stoptime Authors

from sgd_stoptime.constants import MOMENT_DRAW_SIZES
from sgd_stoptime.core.engine import Trajectory
from sgd_stoptime.diagnostics.report import DiagnosticResult
from sgd_stoptime.model.oracle import check_local_moments, check_unbiased, check_weak_growth, make_stream
from sgd_stoptime.model.problem import BoxSampler, UnitBallSampler
from sgd_stoptime.pipeline.context import AbstractContext


class OracleCheckContext(AbstractContext):
    '''
    Statistical checks of the declared oracle constants at sampled points:
    unbiasedness, weak growth G, the order-p moment on the sublevel set and the
    order-(2p-2) moment near critical values. Independent of the trajectories.
    '''
    defaults = {"n": 10000,
                "n_points": 4,
                "half_width": 1.0,
                "region_radius": 1.0,
                "draw_sizes": list(MOMENT_DRAW_SIZES),
                "local_moments": True,
                "seed": 0}

    def drain(self) -> list[DiagnosticResult]:
        problem = self.setup.problem
        oracle = self.setup.oracle
        seed = int(self.params["seed"])
        n = int(self.params["n"])
        points = BoxSampler(float(self.params["half_width"]))(make_stream(seed, 0), int(self.params["n_points"]),
                                                               problem.dimension)
        results = [check_unbiased(oracle, problem, points[0], n, seed),
                   check_weak_growth(oracle, problem, points, n, seed)]
        if self.params["local_moments"]:
            sampler = UnitBallSampler(float(self.params["region_radius"]))
            p = oracle.declared_p
            for region, order in (("sublevel", p), ("s_delta", 2.0 * p - 2.0)):
                results.append(check_local_moments(oracle, problem, region, order, sampler,
                                                   int(self.params["n_points"]),
                                                   tuple(self.params["draw_sizes"]), seed))
        return results


def oracle_statistics(trajectory: Trajectory, context: OracleCheckContext) -> list[DiagnosticResult]:
    return []
