# Copyright 2025 The sgd_stoptime Authors

import copy
import json

import pytest

from sgd_stoptime.core.setup import ExperimentSetup
from sgd_stoptime.model.oracle import AdditiveGaussianOracle
from sgd_stoptime.model.problem import QuadraticProblem
from sgd_stoptime.model.schedule import PowerLawSchedule


MINIMAL_CONFIG = {
    "problem": {"problem": "quadratic", "d": 2},
    "oracle": {"oracle": "additive_gaussian", "sigma": 0.0, "G": 1.0, "p": 3.0},
    "schedule": {"family": "power", "q": 0.4, "scale": 0.5, "p": 3.0},
    "theta1": {"policy": "fixed", "vector": [1.0, 1.0]},
    "T": 500,
    "n_trajectories": 2,
    "base_seed": 0,
    "diagnostics": [
        {"check": "descent_residuals"},
        {"check": "grad_trend"},
    ],
}


@pytest.fixture
def minimal_config() -> dict:
    """Noiseless quadratic experiment that passes its checks.

    Returns:
        dict: a fresh copy of the config, safe to modify in the test
    """
    return copy.deepcopy(MINIMAL_CONFIG)


@pytest.fixture
def write_config(tmp_path):
    """Fixture that returns a function writing a config dict to a JSON file.

    Args:
        tmp_path: per-test temporary directory (pytest fixture)

    Returns:
        Callable: takes the config dict (and an optional file name) and returns the file path as str
    """
    def _write_config(data: dict, name: str = "config.json") -> str:
        path = tmp_path / name
        path.write_text(json.dumps(data, indent=2))
        return str(path)
    return _write_config


@pytest.fixture
def make_setup():
    """Fixture that returns a factory for small quadratic setups.

    The defaults describe a 2-d isotropic quadratic with Gaussian noise and a
    relaxed power-law schedule started at (1, 1). Keyword arguments replace the
    components or any ExperimentSetup argument.

    Returns:
        Callable: keyword arguments -> ExperimentSetup
    """
    def _make_setup(**kwargs) -> ExperimentSetup:
        args = {
            "problem": QuadraticProblem.isotropic(2),
            "oracle": AdditiveGaussianOracle(sigma=0.1),
            "schedule": PowerLawSchedule(q=0.4, scale=0.5),
            "T": 200,
            "theta1": {"policy": "fixed", "vector": [1.0, 1.0]},
        }
        args.update(kwargs)
        return ExperimentSetup(**args)
    return _make_setup
