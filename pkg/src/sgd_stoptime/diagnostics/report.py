# Copyright 2025 The sgd_stoptime Authors

import math
from typing import Iterator

import numpy as np


STATUS_PASS = "pass"
STATUS_FAIL = "fail"
STATUS_INCONCLUSIVE = "inconclusive"
STATUS_NOT_EVALUABLE = "not_evaluable"
STATUS_EMPTY_REGION = "empty_region"

# statuses that neither pass nor fail a run
OPEN_STATUSES = (STATUS_INCONCLUSIVE, STATUS_NOT_EVALUABLE, STATUS_EMPTY_REGION)


def _plain(value):
    '''
    convert numpy scalars/arrays and non-finite floats into JSON-safe python values
    '''
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


class DiagnosticResult:
    '''
    One named check outcome. `passed` is None for open outcomes
    (inconclusive, not evaluable, empty region).
    '''
    def __init__(self,
                 check_name: str,
                 params: dict,
                 value,
                 tolerance=None,
                 passed: bool | None = None,
                 stderr_halfwidth: float | None = None,
                 status: str | None = None,
                 details: dict | None = None) -> None:
        self.check_name = check_name
        self.params = dict(params)
        self.value = value
        self.tolerance = tolerance
        self.passed = None if passed is None else bool(passed)
        self.stderr_halfwidth = stderr_halfwidth
        if status is None:
            status = STATUS_INCONCLUSIVE if passed is None else (STATUS_PASS if passed else STATUS_FAIL)
        self.status = status
        self.details = dict(details or {})

    @classmethod
    def open(cls, check_name: str, params: dict, status: str, reason: str, **details) -> "DiagnosticResult":
        details["reason"] = reason
        return cls(check_name, params, value=None, passed=None, status=status, details=details)

    @property
    def failed(self) -> bool:
        return self.passed is False

    def to_dict(self) -> dict:
        data = {
            "check_name": self.check_name,
            "params": _plain(self.params),
            "value": _plain(self.value),
            "tolerance": _plain(self.tolerance),
            "pass": self.passed,
            "status": self.status,
        }
        if self.stderr_halfwidth is not None:
            data["stderr_halfwidth"] = _plain(self.stderr_halfwidth)
        if self.details:
            data["details"] = _plain(self.details)
        return data

    def __repr__(self) -> str:
        return f"DiagnosticResult({self.check_name}, {self.status}, value={self.value!r})"


class DiagnosticsReport:
    '''
    Ordered collection of results for one trajectory (seed set) or for the ensemble (seed None).
    '''
    def __init__(self, seed: int | None = None) -> None:
        self.seed = seed
        self.results: list[DiagnosticResult] = []

    def add(self, result: DiagnosticResult) -> DiagnosticResult:
        self.results.append(result)
        return result

    def extend(self, results) -> None:
        for r in results:
            self.add(r)

    def __iter__(self) -> Iterator[DiagnosticResult]:
        return iter(self.results)

    def __len__(self) -> int:
        return len(self.results)

    def by_name(self, check_name: str) -> list[DiagnosticResult]:
        return [r for r in self.results if r.check_name == check_name]

    def failures(self) -> list[DiagnosticResult]:
        return [r for r in self.results if r.failed]

    @property
    def passed(self) -> bool:
        return not self.failures()

    def to_dict(self) -> dict:
        return {"seed": self.seed, "results": [r.to_dict() for r in self.results]}
