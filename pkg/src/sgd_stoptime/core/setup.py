# Copyright 2025 The sgd_stoptime Authors

import numpy as np

from sgd_stoptime.constants import DEFAULT_THRESHOLDS
from sgd_stoptime.core.engine import RecordPolicy, SGDEngine
from sgd_stoptime.model.oracle import GradientOracle, make_stream
from sgd_stoptime.model.problem import Problem, UnitBallSampler
from sgd_stoptime.model.schedule import StepSizeSchedule
from sgd_stoptime.types import Vector


THETA1_POLICIES = ("origin", "fixed", "random_ball")

# stream index 0 drives the SGD noise, stream 1 the random start
START_STREAM = 1


class ExperimentSetup:
    '''
    Everything a seeded ensemble needs besides the diagnostics list:
    the components, the horizon, the start policy, record policy and thresholds.
    '''
    def __init__(self,
                 problem: Problem,
                 oracle: GradientOracle,
                 schedule: StepSizeSchedule,
                 T: int,
                 theta1: dict | None = None,
                 record_policy: RecordPolicy | None = None,
                 thresholds: dict | None = None,
                 max_divergence_fraction: float = 0.0) -> None:
        if T < 1:
            raise ValueError(f"T must be >= 1, got {T}")
        self.problem = problem
        self.oracle = oracle
        self.schedule = schedule
        self.T = int(T)
        self.theta1_policy = dict(theta1 or {"policy": "origin"})
        self.record_policy = record_policy or RecordPolicy()
        self.thresholds = dict(DEFAULT_THRESHOLDS)
        for key, value in (thresholds or {}).items():
            if key not in DEFAULT_THRESHOLDS:
                raise KeyError(f"Unknown threshold {key}. Valid thresholds: {sorted(DEFAULT_THRESHOLDS)}")
            self.thresholds[key] = float(value)
        self.max_divergence_fraction = float(max_divergence_fraction)
        self._validate_theta1()

    def _validate_theta1(self) -> None:
        policy = self.theta1_policy.get("policy")
        if policy not in THETA1_POLICIES:
            raise ValueError(f"Unknown theta1 policy {policy}. Valid policies: {THETA1_POLICIES}")
        if policy == "fixed":
            vector = np.asarray(self.theta1_policy.get("vector", []), dtype=np.float64)
            if vector.shape != (self.problem.dimension,):
                raise ValueError(f"theta1 vector has shape {vector.shape}, "
                                 f"expected ({self.problem.dimension},)")
        if policy == "random_ball" and not float(self.theta1_policy.get("radius", 0.0)) > 0.0:
            raise ValueError("theta1 random_ball policy needs a positive radius")

    def threshold(self, name: str) -> float:
        return self.thresholds[name]

    def theta1(self, seed: int) -> Vector:
        policy = self.theta1_policy["policy"]
        d = self.problem.dimension
        if policy == "origin":
            return np.zeros(d)
        if policy == "fixed":
            return np.asarray(self.theta1_policy["vector"], dtype=np.float64).copy()
        sampler = UnitBallSampler(float(self.theta1_policy["radius"]))
        return sampler(make_stream(seed, START_STREAM), 1, d)[0]

    def engine(self) -> SGDEngine:
        return SGDEngine(self.problem, self.oracle, self.schedule, self.record_policy)

    def half_horizon(self) -> int:
        return max(1, self.T // 2)

    def describe(self) -> dict:
        return {
            "problem": self.problem.describe(),
            "oracle": self.oracle.describe(),
            "schedule": self.schedule.describe(),
            "T": self.T,
            "theta1": self.theta1_policy,
            "record_policy": self.record_policy.to_dict(),
            "thresholds": self.thresholds,
            "max_divergence_fraction": self.max_divergence_fraction,
        }
