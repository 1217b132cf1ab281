# Copyright 2025 The sgd_stoptime Authors

import math

import numpy as np
import pandas as pd

from sgd_stoptime.constants import CHECKPOINT_CSV_COLUMNS
from sgd_stoptime.diagnostics.report import _plain


def geometric_checkpoints(T: int) -> list[int]:
    '''
    sorted distinct ceil(T / 2^j) for j = 0, 1, ... down to 1
    '''
    if T < 1:
        raise ValueError(f"Checkpoints need T >= 1, got {T}")
    points = set()
    j = 0
    while True:
        t = -(-T // 2**j)
        points.add(t)
        if t == 1:
            return sorted(points)
        j += 1


def mean_stderr(samples) -> tuple[float, float]:
    '''
    mean and sample standard deviation / sqrt(n)
    '''
    data = np.asarray(samples, dtype=np.float64)
    if len(data) == 0:
        return math.nan, math.nan
    if len(data) == 1:
        return float(data[0]), 0.0
    return float(np.mean(data)), float(np.std(data, ddof=1) / math.sqrt(len(data)))


class EnsembleStats:
    '''
    Cross-trajectory statistics at geometric checkpoints. Diverged trajectories only enter
    diverged_count; all other fields are computed over the finite ones.
    '''
    def __init__(self, n_trajectories: int, checkpoints: list[int]) -> None:
        self.n_trajectories = n_trajectories
        self.checkpoints = list(checkpoints)
        self.diverged_count = 0
        self.mean_grad_sq: list[float] = []
        self.grad_sq_stderr: list[float] = []
        self.median_f_gap: list[float] = []
        self.as_fraction: list[float] = []
        self.mean_mart_inc: list[float] = []
        self.mart_inc_stderr: list[float] = []
        self.as_converged_fraction = math.nan
        self.upcross_saturation: dict[str, dict] = {}
        self.sup_grad_sq_mean = math.nan
        self.sup_grad_sq_half_mean = math.nan
        self.min_grad_norm_mean = math.nan

    @property
    def finite_trajectories(self) -> int:
        return self.n_trajectories - self.diverged_count

    def checkpoint_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "t": self.checkpoints,
            "mean_grad_sq": self.mean_grad_sq,
            "stderr": self.grad_sq_stderr,
            "median_f_gap": self.median_f_gap,
            "as_fraction": self.as_fraction,
        }, columns=CHECKPOINT_CSV_COLUMNS)

    def to_dict(self) -> dict:
        return _plain({
            "n_trajectories": self.n_trajectories,
            "diverged_count": self.diverged_count,
            "checkpoints": self.checkpoints,
            "mean_grad_sq": self.mean_grad_sq,
            "grad_sq_stderr": self.grad_sq_stderr,
            "median_f_gap": self.median_f_gap,
            "as_fraction": self.as_fraction,
            "mean_mart_inc": self.mean_mart_inc,
            "mart_inc_stderr": self.mart_inc_stderr,
            "as_converged_fraction": self.as_converged_fraction,
            "as_proxy_label": "empirical a.s. proxy",
            "upcross_saturation": self.upcross_saturation,
            "sup_grad_sq_mean": self.sup_grad_sq_mean,
            "sup_grad_sq_half_mean": self.sup_grad_sq_half_mean,
            "min_grad_norm_mean": self.min_grad_norm_mean,
        })
