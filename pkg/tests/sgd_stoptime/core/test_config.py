# Copyright 2025 The sgd_stoptime Authors

import pytest

from sgd_stoptime.core.config import ConfigError, ExperimentConfig
from sgd_stoptime.model.schedule import PowerLawSchedule


def test_load_minimal(minimal_config, write_config):
    config = ExperimentConfig.from_json(write_config(minimal_config))
    assert config.T == 500
    assert config.n_trajectories == 2
    assert config.record_policy["keep_noise"] is False
    assert config.max_divergence_fraction == 0.0
    setup = config.build_setup()
    assert isinstance(setup.schedule, PowerLawSchedule)
    assert setup.T == 500


def test_bundled_profile():
    config = ExperimentConfig.from_json("minimal.json")
    assert config.problem_spec["problem"] == "quadratic"


@pytest.mark.parametrize("profile", ["golden_cos_quadratic.json", "golden_martingale.json"])
def test_golden_profiles_validate(profile):
    config = ExperimentConfig.from_json(profile)
    assert config.build_setup().schedule.classify().relaxed.value == "yes"


def test_missing_file():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json("no_such_config.json")


fail_cases = [
    (lambda c: c.pop("problem"), "problem"),
    (lambda c: c.update(horizon=10), "horizon"),
    (lambda c: c.update(T=0), "T"),
    (lambda c: c.update(T=2.5), "T"),
    (lambda c: c.update(n_trajectories=1), "n_trajectories"),
    (lambda c: c["schedule"].update(p=4.0), "schedule.p"),
    (lambda c: c["schedule"].update(family="cosine"), "schedule"),
    (lambda c: c["oracle"].update(sigma=-1.0), "oracle"),
    (lambda c: c.update(theta1={"policy": "fixed", "vector": [1.0]}), "theta1"),
    (lambda c: c.update(theta1={"policy": "fixed", "vektor": [1.0]}), "theta1.vektor"),
    (lambda c: c.update(record_policy={"keep_all": True}), "record_policy.keep_all"),
    (lambda c: c.update(thresholds={"as_tol": 0.5}), "thresholds.as_tol"),
    (lambda c: c.update(max_divergence_fraction=1.5), "max_divergence_fraction"),
    (lambda c: c.update(diagnostics={"check": "grad_trend"}), "diagnostics"),
    (lambda c: c["diagnostics"].append({"nu": 0.1}), "diagnostics[2]"),
    (lambda c: c["diagnostics"].append({"check": "fourier"}), "diagnostics[2].check"),
    (lambda c: c["diagnostics"].append({"check": "truncated_increments", "mu": 0.1}), "diagnostics[2].mu"),
    (lambda c: c["diagnostics"].append({"check": "recursive_inequality", "a": 1.0}), "diagnostics[2]"),
    (lambda c: c["diagnostics"].append({"check": "indicator_descent", "y": -1.0}), "diagnostics[2]"),
    (lambda c: c["diagnostics"].append({"check": "martingale_window"}), "record_policy.keep_noise"),
]


@pytest.mark.parametrize("mutate, field", fail_cases)
def test_config_errors(minimal_config, write_config, mutate, field):
    mutate(minimal_config)
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.from_json(write_config(minimal_config))
    assert err.value.field == field


def test_error_location(minimal_config, write_config):
    minimal_config["horizon"] = 10
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.from_json(write_config(minimal_config))
    assert err.value.line is not None
    assert "horizon" in str(err.value)
    assert f"line {err.value.line}" in str(err.value)


def test_malformed_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "T": 10,\n  "problem": \n}\n')
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.from_json(str(path))
    assert err.value.field == "<document>"
    assert err.value.line == 4


def test_top_level_must_be_object(tmp_path):
    path = tmp_path / "list.json"
    path.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json(str(path))


def test_martingale_window_with_noise(minimal_config, write_config):
    minimal_config["record_policy"] = {"keep_noise": True}
    minimal_config["diagnostics"].append({"check": "martingale_window", "times": [10, 100]})
    config = ExperimentConfig.from_json(write_config(minimal_config))
    assert config.record_policy["keep_noise"] is True


def test_config_hash(minimal_config):
    base = ExperimentConfig(minimal_config).config_hash()
    assert len(base) == 64
    assert ExperimentConfig(dict(minimal_config, output_dir="elsewhere")).config_hash() == base
    assert ExperimentConfig(dict(minimal_config, T=501)).config_hash() != base


def test_normalized_fills_defaults(minimal_config):
    normalized = ExperimentConfig(minimal_config).normalized()
    assert normalized["thresholds"]["stderr_multiplier"] == 2.0
    assert normalized["oracle"]["M0"] == 10.0
    assert "output_dir" not in normalized
