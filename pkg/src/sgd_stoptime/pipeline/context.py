# Copyright 2025 The sgd_stoptime Authors

import sgd_stoptime.logger as sglog
from sgd_stoptime.core.setup import ExperimentSetup
from sgd_stoptime.diagnostics.report import DiagnosticResult
from sgd_stoptime.types import DiagnosticWarning


class AbstractContext:
    '''
    Abstract Context

    Contexts are passed to check functions to keep track of ensemble-level state while
    trajectories are streamed through the diagnostics pipeline one seed at a time.
    A check function returns per-seed results and stores whatever the ensemble verdict
    needs (means, counts, per-seed terms) in its context, keyed by seed, so that the
    verdict does not depend on the order in which workers complete.

    Contexts are attached to check functions at registration time.
    '''
    # set on contexts that want to see diverged trajectories too
    accepts_diverged = False
    # check parameters accepted from the config and their default values
    defaults: dict = {}

    def __init__(self, setup: ExperimentSetup, warnings: list[DiagnosticWarning] = None, **params) -> None:
        self.setup = setup
        invalid = set(params) - set(self.defaults)
        if invalid:
            raise KeyError(f"Invalid parameters for {type(self).__name__}: {sorted(invalid)}. "
                           f"Valid parameters are: {sorted(self.defaults)}")
        self.params = dict(self.defaults)
        self.params.update(params)
        self.warnings: dict[str, DiagnosticWarning] = {}
        self.is_enabled = False

        if warnings is not None:
            for w in warnings:
                self.add_warning(w)

    def enable(self) -> bool:
        self.is_enabled = True
        return self.is_enabled

    def disable(self) -> bool:
        # an earlier enable() wins
        self.is_enabled |= False
        if not self.is_enabled:
            self._disable_warnings()
        return self.is_enabled

    def _disable_warnings(self) -> None:
        for _, w in self.warnings.items():
            w.occurred = False

    def print_warnings(self) -> None:
        for _, w in self.warnings.items():
            if w.has_warning():
                sglog.log(sglog.WARN, w)

    def add_warning(self, warning: DiagnosticWarning):
        self.warnings[warning.get_name()] = warning

    def issue_warning(self, w_name: str, data: dict[str, any] = {}) -> int:
        '''
        uses the default update_fn (int.__add__) for issued warnings
        '''
        if len(data) == 0:
            return self.warnings[w_name].update(data={"count": 1})
        else:
            return self.warnings[w_name].update(data)

    def threshold(self, name: str) -> float:
        return self.setup.threshold(name)

    def drain(self) -> list[DiagnosticResult]:
        '''
        Called once after the last trajectory. Turns the accumulated per-seed state into
        ensemble-level results. Contexts are drained in registration order.
        '''
        return []


class SeedTable:
    '''
    per-seed values collected by a context; iteration is by ascending seed
    '''
    def __init__(self) -> None:
        self._rows: dict[int, any] = {}

    def put(self, seed: int, value) -> None:
        self._rows[int(seed)] = value

    def __len__(self) -> int:
        return len(self._rows)

    def values(self) -> list:
        return [self._rows[k] for k in sorted(self._rows)]

    def seeds(self) -> list[int]:
        return sorted(self._rows)
