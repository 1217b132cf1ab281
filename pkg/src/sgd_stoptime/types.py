# Copyright 2025 The sgd_stoptime Authors

from enum import Enum
import re

import numpy as np
import numpy.typing as npt

import sgd_stoptime.logger as sglog


# points, gradients and noise vectors are flat float arrays
Vector = npt.NDArray[np.float64]


class Verdict(Enum):
    '''
    Tri-state answer for summability questions that finite data cannot always decide.
    '''
    YES = "yes"
    NO = "no"
    UNKNOWN = "unknown"

    @classmethod
    def from_bool(cls, value: bool) -> "Verdict":
        return cls.YES if value else cls.NO

    def __str__(self) -> str:
        return self.value


class DiagnosticWarning:
    """
    Accumulating warning for recoverable conditions found while running or
    analysing trajectories (dropped iterate storage, diverged seeds, empty regions).

        name:      identifier of the warning
        text:      format string with {d[key]} placeholders
        data:      initial value per placeholder key
        update_fn: per-key fold applied by update(); int.__add__ where missing
        auto_log:  log the summary when the object is collected
        is_error:  log at ERROR instead of WARN

    Each occurrence folds its data into the summary:

        w.update({"count": 1, "worst": 3.5})

    applies the preset update_fn for each item, e.g. int.__add__ counts and max keeps the extreme.

    print(w) assembles the summary via __str__(), e.g.
    "Diverged trajectories: 1 (worst step 3.5)"
    """

    def __init__(
            self,
            name: str,
            text: str,
            data: dict[str, any],
            update_fn: dict[str, callable] = None,
            auto_log: bool = True,
            is_error: bool = False):
        self.occurred = False
        self.name = name
        self.text: str = text
        self.args_list: dict[str, any] = dict(data.items())
        self.update_fn: dict[str, callable] = dict((update_fn or {}).items())
        self.auto_log = auto_log
        self.warn_level = sglog.ERROR if is_error else sglog.WARN

        text_keys = re.findall(r"{d\[([.\w]+)\]}", self.text)
        if len(set(text_keys)) != len(self.args_list):
            raise ValueError(
                f"Warning {name}: {len(self.args_list)} args for {len(set(text_keys))} placeholders;"
                " placeholders use the form {d[<key>]}")

        for k in self.update_fn:
            if k not in text_keys or k not in self.args_list:
                raise KeyError(f"update_fn key {k} is not a placeholder of {name}")
        for k in text_keys:
            if k not in self.args_list:
                raise KeyError(f"Placeholder {k} has no initial value in {sorted(self.args_list)}")
            self.update_fn.setdefault(k, int.__add__)

    def __del__(self) -> None:
        if self.auto_log is True and self.has_warning():
            sglog.log(self.warn_level, self)

    def get_name(self) -> str:
        return self.name

    def update(self, data: dict[str, any] = None) -> int:
        if data is None:
            data = {"count": 1}
        items_changed = 0
        for k, v in data.items():
            if k not in self.args_list:
                raise KeyError(f"{self.name} has no placeholder {k}")
            self.args_list[k] = self.update_fn[k](self.args_list[k], v)
            items_changed += 1

        self.occurred |= (items_changed > 0)
        return items_changed

    def has_warning(self) -> bool:
        return self.occurred

    def __str__(self) -> str:
        return self.text.format(d=self.args_list)
