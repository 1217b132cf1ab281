# Copyright 2025 The sgd_stoptime Authors

import math
from typing import Iterator, NamedTuple

import numpy as np
from scipy import special

import sgd_stoptime.logger as sglog
from sgd_stoptime.constants import MONOTONE_PREFIX, SUM_CHUNK, POWER_SUM_HORIZON, M_OF_MAX_INDEX
from sgd_stoptime.types import Verdict


class ScheduleClassification(NamedTuple):
    robbins_monro: Verdict
    relaxed: Verdict
    tests: list[str]

    def __str__(self) -> str:
        return f"RM: {self.robbins_monro}, relaxed: {self.relaxed}"


class StepSizeSchedule:
    '''
    Abstract step-size schedule

    A schedule is a positive, nonincreasing sequence eps_t (t >= 1) plus the exponent p
    against which the relaxed summability condition sum eps_t^p < inf is judged.

    Subclasses implement
    * _eval(t)                   vectorized eps_t for a float array of indices
    * series_diverges(power)     analytic verdict on sum eps_t^power = inf
    * _governing_test(power)     human readable reason for that verdict
    * tail_bound(power, t)       bound on sum_{k>t} eps_k^power
    '''
    family = "abstract"

    def __init__(self, p_exponent: float = 3.0) -> None:
        if not p_exponent > 2.0:
            raise ValueError(f"p_exponent must be > 2, got {p_exponent}")
        self.p_exponent = float(p_exponent)
        self._power_sums: dict[tuple[float, int], float] = {}

    # number of defined steps; None for unbounded analytic families
    @property
    def length(self) -> int | None:
        return None

    def _eval(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError("Class %s doesn't implement _eval()" % (self.__class__.__name__))

    def series_diverges(self, power: float) -> Verdict:
        raise NotImplementedError("Class %s doesn't implement series_diverges()" % (self.__class__.__name__))

    def _governing_test(self, power: float) -> str:
        raise NotImplementedError("Class %s doesn't implement _governing_test()" % (self.__class__.__name__))

    def tail_bound(self, power: float, t: int) -> float:
        raise NotImplementedError("Class %s doesn't implement tail_bound()" % (self.__class__.__name__))

    def params(self) -> dict:
        raise NotImplementedError("Class %s doesn't implement params()" % (self.__class__.__name__))

    def describe(self) -> dict:
        desc = {"family": self.family, "p": self.p_exponent}
        desc.update(self.params())
        return desc

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v}" for k, v in self.params().items())
        return f"{self.__class__.__name__}({args}, p={self.p_exponent})"

    def _check_index(self, t: int) -> None:
        if t < 1:
            raise ValueError(f"Step index must be >= 1, got {t}")
        if self.length is not None and t > self.length:
            raise IndexError(f"Step index {t} beyond table length {self.length}")

    def step_size(self, t: int) -> float:
        self._check_index(t)
        return float(self._eval(np.array([t], dtype=np.float64))[0])

    def step_sizes(self, start: int, stop: int) -> np.ndarray:
        '''
        eps_t for t = start..stop (inclusive)
        '''
        self._check_index(start)
        self._check_index(stop)
        return self._eval(np.arange(start, stop + 1, dtype=np.float64))

    def classify(self) -> ScheduleClassification:
        div_1 = self.series_diverges(1.0)
        div_2 = self.series_diverges(2.0)
        div_p = self.series_diverges(self.p_exponent)
        tests = [self._governing_test(k) for k in (1.0, 2.0, self.p_exponent)]
        return ScheduleClassification(
            robbins_monro=self._combine(div_1, div_2),
            relaxed=self._combine(div_1, div_p),
            tests=tests)

    @staticmethod
    def _combine(first_diverges: Verdict, power_diverges: Verdict) -> Verdict:
        # condition: sum eps = inf and sum eps^k < inf
        if Verdict.UNKNOWN in (first_diverges, power_diverges):
            return Verdict.UNKNOWN
        return Verdict.from_bool(first_diverges == Verdict.YES and power_diverges == Verdict.NO)

    def partial_sum(self, power: float, t: int) -> float:
        if t < 0:
            raise ValueError(f"Partial sums need t >= 0, got {t}")
        total = 0.0
        for start in range(1, t + 1, SUM_CHUNK):
            stop = min(start + SUM_CHUNK - 1, t)
            total += float(np.sum(self.step_sizes(start, stop) ** power))
        return total

    def _cumulative_chunks(self, t_end: int | None = None) -> Iterator[tuple[int, np.ndarray]]:
        # chunk boundaries do not depend on t_end, so sigma_epsilon and m_of see identical sums
        offset = 0.0
        start = 1
        while True:
            stop = start + SUM_CHUNK - 1
            if t_end is not None:
                stop = min(stop, t_end)
            if self.length is not None:
                stop = min(stop, self.length)
            if stop < start:
                return
            cum = offset + np.cumsum(self.step_sizes(start, stop))
            yield start, cum
            offset = float(cum[-1])
            start = stop + 1

    def sigma_epsilon(self, t: int) -> float:
        if t < 0:
            raise ValueError(f"sigma_epsilon needs t >= 0, got {t}")
        if t == 0:
            return 0.0
        self._check_index(t)
        value = 0.0
        for _, cum in self._cumulative_chunks(t):
            value = float(cum[-1])
        return value

    def m_of(self, s: float) -> int:
        '''
        largest j with sigma_epsilon(j) <= s
        '''
        if s < 0.0:
            return 0
        last = 0
        for start, cum in self._cumulative_chunks():
            if cum[-1] > s:
                return start - 1 + int(np.searchsorted(cum, s, side="right"))
            last = start - 1 + len(cum)
            if last >= M_OF_MAX_INDEX:
                raise ValueError(f"m_of({s}) exceeds {M_OF_MAX_INDEX} steps; is the schedule summable?")
        return last

    def power_sum(self, power: float, horizon: int = POWER_SUM_HORIZON) -> float:
        '''
        certified upper bound on sum_t eps_t^power: partial sum up to horizon plus integral-test tail
        '''
        key = (float(power), int(horizon))
        if key not in self._power_sums:
            tail = self.tail_bound(power, horizon)
            if math.isinf(tail):
                self._power_sums[key] = math.inf
            else:
                self._power_sums[key] = self.partial_sum(power, horizon) + tail
        return self._power_sums[key]


class PowerLawSchedule(StepSizeSchedule):
    '''
    eps_t = scale / t^q
    '''
    family = "power"

    def __init__(self, q: float, scale: float = 1.0, p_exponent: float = 3.0) -> None:
        super().__init__(p_exponent)
        if not q > 0.0 or not scale > 0.0:
            raise ValueError(f"PowerLaw needs q > 0 and scale > 0, got q={q}, scale={scale}")
        self.q = float(q)
        self.scale = float(scale)

    def params(self) -> dict:
        return {"q": self.q, "scale": self.scale}

    def _eval(self, t: np.ndarray) -> np.ndarray:
        return self.scale / t ** self.q

    def series_diverges(self, power: float) -> Verdict:
        return Verdict.from_bool(self.q * power <= 1.0)

    def _governing_test(self, power: float) -> str:
        verdict = "diverges" if self.q * power <= 1.0 else "converges"
        return f"p-series: sum 1/t^(q*{power:g}) with q*{power:g}={self.q * power:g} {verdict}"

    def tail_bound(self, power: float, t: int) -> float:
        a = self.q * power
        if a <= 1.0:
            return math.inf
        return self.scale ** power * float(t) ** (1.0 - a) / (a - 1.0)


class LogPowerLawSchedule(StepSizeSchedule):
    '''
    eps_t = scale * log(u) / u^q with u = max(t, e^(1/q))

    log(u)/u^q peaks at u = e^(1/q); holding the value of the peak for smaller t keeps the
    prefix positive and nonincreasing without touching the tail.
    '''
    family = "log_power"

    def __init__(self, q: float, scale: float = 1.0, p_exponent: float = 3.0) -> None:
        super().__init__(p_exponent)
        if not q > 0.0 or not scale > 0.0:
            raise ValueError(f"LogPowerLaw needs q > 0 and scale > 0, got q={q}, scale={scale}")
        self.q = float(q)
        self.scale = float(scale)
        self.peak = math.exp(1.0 / self.q)
        self._verify_prefix()

    def _verify_prefix(self) -> None:
        prefix = self.step_sizes(1, MONOTONE_PREFIX)
        if not (np.all(prefix > 0.0) and np.all(np.diff(prefix) <= 0.0)):
            raise ValueError(f"{self!r} is not positive and nonincreasing on its first {MONOTONE_PREFIX} steps")
        sglog.log(sglog.TRACE, "Verified monotone prefix for", self)

    def params(self) -> dict:
        return {"q": self.q, "scale": self.scale}

    def _eval(self, t: np.ndarray) -> np.ndarray:
        u = np.maximum(t, self.peak)
        return self.scale * np.log(u) / u ** self.q

    def series_diverges(self, power: float) -> Verdict:
        # sum (log t)^k / t^(qk) diverges iff qk <= 1
        return Verdict.from_bool(self.q * power <= 1.0)

    def _governing_test(self, power: float) -> str:
        verdict = "diverges" if self.q * power <= 1.0 else "converges"
        return f"log-weighted p-series: sum log(t)^{power:g}/t^(q*{power:g}) with q*{power:g}={self.q * power:g} {verdict}"

    def tail_bound(self, power: float, t: int) -> float:
        a = self.q * power
        if a <= 1.0:
            return math.inf
        # the integrand log(x)^P x^-a decreases past x = e^(P/a) = peak
        t0 = max(int(t), math.ceil(self.peak))
        explicit = 0.0
        if t0 > t:
            explicit = float(np.sum(self.step_sizes(t + 1, t0) ** power))
        z = (a - 1.0) * math.log(t0)
        integral = special.gammaincc(power + 1.0, z) * special.gamma(power + 1.0) / (a - 1.0) ** (power + 1.0)
        return explicit + self.scale ** power * float(integral)


class ConstantSchedule(StepSizeSchedule):
    family = "constant"

    def __init__(self, value: float, p_exponent: float = 3.0) -> None:
        super().__init__(p_exponent)
        if not value > 0.0:
            raise ValueError(f"Constant schedule needs value > 0, got {value}")
        self.value = float(value)

    def params(self) -> dict:
        return {"value": self.value}

    def _eval(self, t: np.ndarray) -> np.ndarray:
        return np.full(t.shape, self.value)

    def series_diverges(self, power: float) -> Verdict:
        return Verdict.YES

    def _governing_test(self, power: float) -> str:
        return f"constant: sum eps^{power:g} grows linearly and diverges"

    def tail_bound(self, power: float, t: int) -> float:
        return math.inf


class TableSchedule(StepSizeSchedule):
    family = "table"

    def __init__(self, values: list[float], p_exponent: float = 3.0) -> None:
        super().__init__(p_exponent)
        table = np.asarray(values, dtype=np.float64)
        if table.ndim != 1 or len(table) == 0:
            raise ValueError("Table schedule needs a non-empty flat list of step sizes")
        if not np.all(table > 0.0):
            raise ValueError("Table schedule entries must be positive")
        if not np.all(np.diff(table) <= 0.0):
            raise ValueError("Table schedule entries must be nonincreasing")
        self.values = table

    @property
    def length(self) -> int:
        return len(self.values)

    def params(self) -> dict:
        return {"values": self.values.tolist()}

    def _eval(self, t: np.ndarray) -> np.ndarray:
        return self.values[t.astype(np.int64) - 1]

    def series_diverges(self, power: float) -> Verdict:
        return Verdict.UNKNOWN

    def _governing_test(self, power: float) -> str:
        return "table: a finite prefix cannot decide summability"

    def tail_bound(self, power: float, t: int) -> float:
        raise ValueError("Table schedules carry no analytic tail; sum eps^p cannot be certified")


_SCHEDULE_FIELDS = {
    "power": (PowerLawSchedule, {"q": None, "scale": 1.0, "p": 3.0}),
    "log_power": (LogPowerLawSchedule, {"q": None, "scale": 1.0, "p": 3.0}),
    "constant": (ConstantSchedule, {"value": None, "p": 3.0}),
    "table": (TableSchedule, {"values": None, "p": 3.0}),
}


def schedule_from_dict(spec: dict) -> StepSizeSchedule:
    '''
    Build a schedule from its config form, e.g. {"family": "power", "q": 0.4, "scale": 1.0, "p": 3.0}

    Raises KeyError for unknown families and ValueError for missing or unknown attributes.
    '''
    spec = dict(spec)
    family = spec.pop("family", None)
    if family not in _SCHEDULE_FIELDS:
        raise KeyError(f"Unknown schedule family '{family}'. Valid families are: {sorted(_SCHEDULE_FIELDS)}")
    cls, fields = _SCHEDULE_FIELDS[family]

    invalid = set(spec) - set(fields)
    if invalid:
        raise ValueError(
            f"Invalid attributes in schedule: {sorted(invalid)}. "
            f"Valid attributes are: {sorted(fields)}")
    args = dict(fields)
    args.update(spec)
    missing = [k for k, v in args.items() if v is None]
    if missing:
        raise ValueError(f"Schedule family '{family}' requires {missing}")

    p = args.pop("p")
    return cls(**args, p_exponent=p)
