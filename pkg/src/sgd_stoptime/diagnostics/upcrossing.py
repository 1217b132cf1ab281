# Copyright 2025 The sgd_stoptime Authors

import math

import numpy as np


class Interval:
    '''
    Interval (e, o) for up-crossing counts; o may be +inf.
    '''
    def __init__(self, e: float, o: float) -> None:
        if not e < o:
            raise ValueError(f"Interval needs e < o, got e={e}, o={o}")
        self.e = float(e)
        self.o = float(o)

    @property
    def width(self) -> float:
        return self.o - self.e

    def to_list(self) -> list:
        return [self.e, self.o if math.isfinite(self.o) else "inf"]

    def __eq__(self, other) -> bool:
        return isinstance(other, Interval) and (self.e, self.o) == (other.e, other.o)

    def __hash__(self) -> int:
        return hash((self.e, self.o))

    def __repr__(self) -> str:
        return f"Interval({self.e!r}, {self.o!r})"


def upcrossing_states(values, interval: Interval) -> np.ndarray:
    '''
    -1 below e, +1 at or above o, 0 inside [e, o)
    '''
    x = np.asarray(values, dtype=np.float64)
    return np.where(x < interval.e, -1, np.where(x >= interval.o, 1, 0)).astype(np.int8)


def count_upcrossings(values, interval: Interval) -> int:
    '''
    Number of up-crossings of (e, o): index pairs t1 < t2 with x[t1] < e, x[t2] >= o and
    every entry strictly between them inside [e, o). Crossings found this way are disjoint,
    so the greedy left-to-right scan is the canonical count.
    '''
    states = upcrossing_states(values, interval)
    visible = states[states != 0]
    if len(visible) < 2:
        return 0
    return int(np.count_nonzero((visible[:-1] == -1) & (visible[1:] == 1)))


def upcrossing_times(values, interval: Interval) -> list[tuple[int, int]]:
    '''
    1-based (t1, t2) pairs of the counted up-crossings
    '''
    states = upcrossing_states(values, interval)
    idx = np.flatnonzero(states)
    visible = states[idx]
    starts = np.flatnonzero((visible[:-1] == -1) & (visible[1:] == 1))
    return [(int(idx[k]) + 1, int(idx[k + 1]) + 1) for k in starts]
