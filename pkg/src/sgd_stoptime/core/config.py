# Copyright 2025 The sgd_stoptime Authors

import json
import os
import re
from copy import deepcopy
from pathlib import Path

import sgd_stoptime.logger as sglog
from sgd_stoptime.constants import DEFAULT_MEMORY_BUDGET, DEFAULT_THRESHOLDS
from sgd_stoptime.core.engine import RecordPolicy, canonical_hash
from sgd_stoptime.core.setup import ExperimentSetup
from sgd_stoptime.model.oracle import oracle_from_dict
from sgd_stoptime.model.problem import problem_from_dict
from sgd_stoptime.model.schedule import schedule_from_dict
from sgd_stoptime.pipeline import lookup_check


class ConfigError(ValueError):
    '''
    invalid experiment config; field is the dotted path of the offending entry
    '''
    def __init__(self, message: str, field: str | None = None, line: int | None = None,
                 column: int | None = None) -> None:
        super().__init__(message)
        self.message = message
        self.field = field
        self.line = line
        self.column = column

    def __str__(self) -> str:
        text = self.message if self.field is None else f"{self.field}: {self.message}"
        if self.line is not None:
            text += f" (line {self.line}, column {self.column})"
        return text


class ExperimentConfig:
    '''
    Strict JSON experiment config. Unknown keys are rejected at every level; missing keys
    take the values in `defaults`. problem, oracle and schedule are required.
    '''
    _profiles_dir = os.path.join(os.path.dirname(__file__), "../profiles/")

    required = ("problem", "oracle", "schedule")
    defaults = {
        "theta1": {"policy": "origin"},
        "T": 10000,
        "n_trajectories": 32,
        "base_seed": 0,
        "diagnostics": [],
        "record_policy": {"keep_iterates": False, "keep_noise": False, "memory_budget": DEFAULT_MEMORY_BUDGET},
        "thresholds": {},
        "require_relaxed": False,
        "max_divergence_fraction": 0.0,
        "export_trajectories": False,
        "output_dir": None,
    }

    def __init__(self, data: dict, source_text: str | None = None) -> None:
        self._text = source_text
        self._validate_keys(data, set(self.required) | set(self.defaults), "")
        for key in self.required:
            if key not in data:
                raise self._error(f"missing required entry '{key}'", key)
        merged = deepcopy(self.defaults)
        merged.update(deepcopy(data))

        self.problem_spec = self._component(merged["problem"], "problem", problem_from_dict)
        self.oracle_spec = self._component(merged["oracle"], "oracle", oracle_from_dict)
        self.schedule_spec = self._component(merged["schedule"], "schedule", schedule_from_dict)
        self.T = self._integer(merged["T"], "T", minimum=1)
        self.n_trajectories = self._integer(merged["n_trajectories"], "n_trajectories", minimum=2)
        self.base_seed = self._integer(merged["base_seed"], "base_seed", minimum=0)
        self.theta1 = merged["theta1"]
        self._validate_keys(self.theta1, {"policy", "vector", "radius"}, "theta1")
        record = dict(self.defaults["record_policy"])
        self._validate_keys(merged["record_policy"], set(record), "record_policy")
        record.update(merged["record_policy"])
        self.record_policy = record
        self._validate_keys(merged["thresholds"], set(DEFAULT_THRESHOLDS), "thresholds")
        self.thresholds = dict(merged["thresholds"])
        self.require_relaxed = bool(merged["require_relaxed"])
        self.max_divergence_fraction = float(merged["max_divergence_fraction"])
        if not 0.0 <= self.max_divergence_fraction <= 1.0:
            raise self._error("must lie in [0, 1]", "max_divergence_fraction")
        self.export_trajectories = bool(merged["export_trajectories"])
        self.output_dir = merged["output_dir"]
        self.diagnostics = merged["diagnostics"]

        self._problem = problem_from_dict(self.problem_spec)
        self._oracle = oracle_from_dict(self.oracle_spec)
        self._schedule = schedule_from_dict(self.schedule_spec)
        if self._schedule.p_exponent != self._oracle.declared_p:
            raise self._error(f"schedule p={self._schedule.p_exponent:g} differs from oracle "
                              f"p={self._oracle.declared_p:g}; both must use the same p", "schedule.p")
        try:
            self._setup = self.build_setup()
        except (KeyError, ValueError) as err:
            raise self._error(str(err), "theta1") from err
        self._validate_diagnostics()

    @classmethod
    def from_json(cls, file) -> "ExperimentConfig":
        if not os.path.isfile(file):
            # try the bundled profiles
            file = os.path.join(cls._profiles_dir, file)
        if not os.path.isfile(file):
            raise ConfigError(f"config file not found: {file}")
        text = Path(file).read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as err:
            raise ConfigError(err.msg, "<document>", err.lineno, err.colno) from err
        if not isinstance(data, dict):
            raise ConfigError("top level must be a JSON object", "<document>")
        sglog.log(sglog.DEBUG, "Loaded config", file)
        return cls(data, source_text=text)

    def _locate(self, field: str) -> tuple[int | None, int | None]:
        # best effort: first occurrence of the innermost key in the source text
        if self._text is None or not field:
            return None, None
        key = re.split(r"[.\[]", field)[-1].rstrip("]")
        match = re.search(r'"%s"\s*:' % re.escape(key), self._text)
        if match is None:
            return None, None
        before = self._text[:match.start()]
        return before.count("\n") + 1, match.start() - before.rfind("\n")

    def _error(self, message: str, field: str) -> ConfigError:
        line, column = self._locate(field)
        return ConfigError(message, field, line, column)

    def _validate_keys(self, data, valid: set, field: str) -> None:
        if not isinstance(data, dict):
            raise self._error("must be a JSON object", field or "<document>")
        invalid = set(data) - valid
        if invalid:
            first = sorted(invalid)[0]
            raise self._error(f"Invalid attributes: {sorted(invalid)}. Valid attributes are: {sorted(valid)}",
                              f"{field}.{first}" if field else first)

    def _component(self, spec, field: str, factory) -> dict:
        if not isinstance(spec, dict):
            raise self._error("must be a JSON object", field)
        try:
            factory(spec)
        except (KeyError, ValueError, TypeError) as err:
            raise self._error(str(err).strip("'\""), field) from err
        return dict(spec)

    def _integer(self, value, field: str, minimum: int) -> int:
        if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
            raise self._error(f"must be an integer >= {minimum}, got {value!r}", field)
        return value

    def _validate_diagnostics(self) -> None:
        if not isinstance(self.diagnostics, list):
            raise self._error("must be a list of {\"check\": name, ...} objects", "diagnostics")
        for i, entry in enumerate(self.diagnostics):
            field = f"diagnostics[{i}]"
            if not isinstance(entry, dict) or "check" not in entry:
                raise self._error("needs a 'check' name", field)
            params = dict(entry)
            try:
                _, context_cls = lookup_check(params.pop("check"))
            except KeyError as err:
                raise self._error(str(err).strip("'\""), f"{field}.check") from err
            self._validate_keys(params, set(context_cls.defaults), field)
            try:
                context_cls(self._setup, **params)
            except (KeyError, ValueError) as err:
                raise self._error(str(err).strip("'\""), field) from err
            if entry["check"] == "martingale_window" and not self.record_policy["keep_noise"]:
                raise self._error("martingale_window needs the noise records; set it to true",
                                  "record_policy.keep_noise")

    def build_setup(self) -> ExperimentSetup:
        return ExperimentSetup(problem_from_dict(self.problem_spec),
                               oracle_from_dict(self.oracle_spec),
                               schedule_from_dict(self.schedule_spec),
                               self.T,
                               theta1=self.theta1,
                               record_policy=RecordPolicy(**self.record_policy),
                               thresholds=self.thresholds,
                               max_divergence_fraction=self.max_divergence_fraction)

    def normalized(self) -> dict:
        '''
        canonical form: defaults filled in, components in their describe() form
        '''
        return {
            "problem": self._problem.describe(),
            "oracle": self._oracle.describe(),
            "schedule": self._schedule.describe(),
            "theta1": self.theta1,
            "T": self.T,
            "n_trajectories": self.n_trajectories,
            "base_seed": self.base_seed,
            "diagnostics": self.diagnostics,
            "record_policy": self.record_policy,
            "thresholds": dict(DEFAULT_THRESHOLDS, **self.thresholds),
            "require_relaxed": self.require_relaxed,
            "max_divergence_fraction": self.max_divergence_fraction,
            "export_trajectories": self.export_trajectories,
        }

    def config_hash(self) -> str:
        # output_dir is not part of the hash
        return canonical_hash(self.normalized())
