# Copyright 2025 The sgd_stoptime Authors

import json

import pytest

from sgd_stoptime.core.stoptimer import main


tests_to_run_with_raise: list[tuple[str, int]] = [
    (
        "--help",
        0
    ),
    (
        "--version",
        0
    ),
    (
        "",  # no subcommand
        2
    ),
    (
        "-D 5 classify --family power --q 0.4",  # out of range debug level
        2
    ),
    (
        "run",  # missing config
        2
    ),
    (
        "run nonexistent.json",
        2
    ),
    (
        "classify --family power",  # missing exponent
        2
    ),
    (
        "classify --family cosine --q 0.4",
        2
    ),
    (
        "classify --family power --q 0.4 --p 2",  # p must exceed 2
        2
    ),
    (
        "classify --family table --values 0.5 0.25",
        0
    ),
]


# any stoptimer runs that end with a system exit code
@pytest.mark.parametrize('test_args, exit_code', tests_to_run_with_raise)
def test_stoptimer_with_raise(test_args: str, exit_code: int):
    with pytest.raises(SystemExit) as cli_res:
        main(test_args.split())
    assert cli_res.value.code == exit_code


def test_bin_script_entry_point():
    from stoptimer import main as script_main
    with pytest.raises(SystemExit) as cli_res:
        script_main(["-D", "0", "classify", "--family", "power", "--q", "0.6"])
    assert cli_res.value.code == 0


@pytest.mark.parametrize("test_args, verdict",
                         [
                             ("--family power --q 0.4", "RM: no, relaxed: yes"),
                             ("--family power --q 0.7", "RM: yes, relaxed: yes"),
                             ("--family power --q 0.3", "RM: no, relaxed: no"),
                             ("--family constant --value 0.1", "RM: no, relaxed: no"),
                         ])
def test_classify(test_args: str, verdict: str, capsys):
    with pytest.raises(SystemExit) as cli_res:
        main(["-D", "0", "classify"] + test_args.split())
    assert cli_res.value.code == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[1] == f"verdict    {verdict}"
    assert [line.split()[0] for line in lines[2:]] == ["sum^1", "sum^2", "sum^3"]


def run_cli(args: list[str]) -> int:
    with pytest.raises(SystemExit) as cli_res:
        main(args)
    return cli_res.value.code


def test_run_writes_artifacts(minimal_config, write_config, tmp_path):
    out = tmp_path / "out"
    assert run_cli(["run", write_config(minimal_config), "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["artifacts"] == ["checkpoints.csv", "diagnostics.json", "ensemble.json"]
    assert json.loads((out / "diagnostics.json").read_text())["passed"] is True


def test_run_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("STOPTIMER_OUTPUT_DIR", str(tmp_path / "from_env"))
    # bundled profile, looked up by name
    assert run_cli(["run", "minimal.json", "--threads", "2"]) == 0
    assert (tmp_path / "from_env" / "checkpoints.csv").is_file()


def test_run_output_dir_from_config(minimal_config, write_config, tmp_path, monkeypatch):
    monkeypatch.setenv("STOPTIMER_OUTPUT_DIR", str(tmp_path / "from_env"))
    minimal_config["output_dir"] = str(tmp_path / "from_config")
    assert run_cli(["run", write_config(minimal_config)]) == 0
    assert (tmp_path / "from_config" / "manifest.json").is_file()
    assert not (tmp_path / "from_env").exists()


def test_run_seed_override(minimal_config, write_config, tmp_path):
    out = tmp_path / "out"
    assert run_cli(["run", write_config(minimal_config), "-o", str(out), "--seed-override", "7"]) == 0
    assert json.loads((out / "manifest.json").read_text())["seeds"] == [7, 8]
    assert run_cli(["run", write_config(minimal_config), "-o", str(out), "--seed-override", "-1"]) == 2


@pytest.mark.parametrize("threads, exit_code", [("0", 0), ("1", 0), ("-1", 2)])
def test_run_threads(minimal_config, write_config, tmp_path, threads: str, exit_code: int):
    out = tmp_path / "out"
    assert run_cli(["run", write_config(minimal_config), "-o", str(out), "--threads", threads]) == exit_code
    assert (out / "manifest.json").is_file() == (exit_code == 0)


def test_run_invalid_config(minimal_config, write_config, tmp_path):
    minimal_config["thresholds"] = {"as_grad_tolerance": 0.1}
    assert run_cli(["run", write_config(minimal_config), "-o", str(tmp_path)]) == 2


@pytest.fixture
def diverging_config(minimal_config) -> dict:
    """Constant step 3 on the unit quadratic: every trajectory overflows.

    Args:
        minimal_config: config dict (fixture)

    Returns:
        dict: config without a relaxed schedule
    """
    minimal_config["schedule"] = {"family": "constant", "value": 3.0, "p": 3.0}
    minimal_config["T"] = 5000
    return minimal_config


def test_run_divergence_fails(diverging_config, write_config, tmp_path):
    out = tmp_path / "out"
    assert run_cli(["run", write_config(diverging_config), "-o", str(out)]) == 1
    ensemble = json.loads((out / "ensemble.json").read_text())
    assert ensemble["diverged_fraction"] == 1.0
    diagnostics = json.loads((out / "diagnostics.json").read_text())
    assert diagnostics["schedule"]["guarantee"] == "no guarantee"
    assert diagnostics["passed"] is False


def test_run_divergence_tolerated(diverging_config, write_config, tmp_path):
    diverging_config["max_divergence_fraction"] = 1.0
    assert run_cli(["run", write_config(diverging_config), "-o", str(tmp_path)]) == 0


def test_run_requires_relaxed_schedule(diverging_config, write_config, tmp_path):
    diverging_config["require_relaxed"] = True
    assert run_cli(["run", write_config(diverging_config), "-o", str(tmp_path / "out")]) == 2
    assert not (tmp_path / "out").exists()


@pytest.mark.slow
@pytest.mark.parametrize("profile", ["golden_cos_quadratic.json", "golden_martingale.json"])
def test_golden_profiles(profile: str, tmp_path):
    first, second = tmp_path / "first", tmp_path / "second"
    assert run_cli(["run", profile, "-o", str(first), "-t", "4"]) == 0
    assert run_cli(["run", profile, "-o", str(second), "-t", "1"]) == 0
    for name in ("checkpoints.csv", "ensemble.json", "manifest.json"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


GOLDEN_CHECKS = {
    "golden_cos_quadratic.json": ["descent_residuals", "indicator_descent", "loss_bound", "truncated_increments",
                                  "martingale_mean", "recursive_inequality", "upcrossing_saturation", "as_proxy",
                                  "critical_value_match", "grad_trend", "sup_grad_stability", "liminf_proxy"],
    "golden_martingale.json": ["martingale_mean", "martingale_window"],
}


@pytest.mark.slow
@pytest.mark.parametrize("profile", sorted(GOLDEN_CHECKS))
def test_golden_profile_checks_pass(profile: str, tmp_path):
    assert run_cli(["run", profile, "-o", str(tmp_path), "-t", "0"]) == 0
    ensemble = json.loads((tmp_path / "diagnostics.json").read_text())["ensemble"]
    assert [r["check_name"] for r in ensemble] == GOLDEN_CHECKS[profile]
    for result in ensemble:
        assert result["status"] == "pass", result["check_name"]
