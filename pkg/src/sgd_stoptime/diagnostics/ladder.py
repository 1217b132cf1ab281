# Copyright 2025 The sgd_stoptime Authors

import math
from typing import Iterator

import numpy as np

from sgd_stoptime.core.engine import FingerprintMismatch, Trajectory


def _next_true(mask: np.ndarray) -> np.ndarray:
    '''
    nxt[i] = smallest j >= i with mask[j], or len(mask) if there is none
    '''
    n = len(mask)
    idx = np.where(mask, np.arange(n), n)
    return np.minimum.accumulate(idx[::-1])[::-1]


def _first_from(nxt: np.ndarray, start: float) -> float:
    '''
    1-based first time >= start picked by a _next_true table, inf if none
    '''
    if not math.isfinite(start) or start > len(nxt):
        return math.inf
    j = nxt[int(start) - 1]
    return math.inf if j == len(nxt) else float(j + 1)


class StoppingTimeLadder:
    '''
    Stopping times mu_1 <= mu_2 <= ... over x = f - f* in triples

        mu_{3k-2} = min{t >= mu_{3k-3} : x_t >= h1}
        mu_{3k-1} = min{t >= mu_{3k-2} : x_t >= h2 or x_t < h1}
        mu_{3k}   = min{t >= mu_{3k-1} : x_t < h1}

    with mu_0 = 1. Times are 1-based; +inf past the data. The ladder ends after the first
    infinite time. truncated() gives mu_{n,T} = min(mu_n, T).
    '''
    def __init__(self, h1: float, h2: float, T: int, times, fingerprint: str = "manual") -> None:
        self.h1 = float(h1)
        self.h2 = float(h2)
        self.T = int(T)
        self.times = np.asarray(times, dtype=np.float64)
        self.fingerprint = fingerprint

    def __len__(self) -> int:
        return len(self.times)

    def truncated(self) -> np.ndarray:
        return np.minimum(self.times, self.T).astype(np.int64)

    def triples(self) -> Iterator[tuple[float, float, float]]:
        padded = np.concatenate([self.times, np.full((-len(self.times)) % 3, math.inf)])
        for k in range(0, len(padded), 3):
            yield float(padded[k]), float(padded[k + 1]), float(padded[k + 2])

    def excursions(self) -> Iterator[tuple[int, int]]:
        '''
        non-empty 1-based inclusive ranges [mu_{3k-2,T}, mu_{3k-1,T} - 1]
        '''
        for start, stop, _ in self.triples():
            lo = int(min(start, self.T))
            hi = int(min(stop, self.T)) - 1
            if lo <= hi:
                yield lo, hi


def ladder_from_gaps(gaps, h1: float, h2: float, T: int | None = None, fingerprint: str = "manual") -> StoppingTimeLadder:
    if not h1 < h2:
        raise ValueError(f"Ladder needs h1 < h2, got h1={h1}, h2={h2}")
    x = np.asarray(gaps, dtype=np.float64)
    if T is None:
        T = len(x)
    if not 1 <= T <= len(x):
        raise ValueError(f"Ladder truncation T={T} must lie in [1, {len(x)}]")
    x = x[:T]
    tables = (_next_true(x >= h1),
              _next_true((x >= h2) | (x < h1)),
              _next_true(x < h1))
    return StoppingTimeLadder(h1, h2, T, _cycle_times(tables), fingerprint)


def _cycle_times(tables) -> list[float]:
    '''
    cycle through the next-time tables starting at t = 1 until the first infinite time
    '''
    times = []
    previous = 1.0
    while True:
        for table in tables:
            previous = _first_from(table, previous)
            times.append(previous)
            if math.isinf(previous):
                return times


def build_ladder(trajectory: Trajectory, h1: float, h2: float, T: int | None = None) -> StoppingTimeLadder:
    return ladder_from_gaps(trajectory.f_gap, h1, h2, trajectory.n_steps if T is None else T,
                            trajectory.fingerprint)


def hitting_time(trajectory: Trajectory, t0: int, upsilon: float) -> float:
    '''
    first t >= t0 with ||grad f(theta_t)|| <= upsilon, inf when absent
    '''
    if t0 < 1:
        raise ValueError(f"hitting_time needs t0 >= 1, got {t0}")
    hits = np.flatnonzero(trajectory.grad_norm[t0 - 1:] <= upsilon)
    return math.inf if len(hits) == 0 else int(t0 + hits[0])


def grad_quadratic_variation(trajectory: Trajectory, ladder: StoppingTimeLadder, m: int) -> float:
    '''
    sum over the ladder excursions of eps_t^m ||grad f(theta_t)||^2
    '''
    if m < 1:
        raise ValueError(f"Gradient quadratic variation needs m >= 1, got {m}")
    if ladder.fingerprint != trajectory.fingerprint:
        raise FingerprintMismatch(f"Ladder fingerprint {ladder.fingerprint[:12]} was not built from trajectory "
                                  f"{trajectory.fingerprint[:12]} (seed {trajectory.seed})")
    weights = trajectory.eps**m * trajectory.grad_norm**2
    cumulative = np.concatenate([[0.0], np.cumsum(weights)])
    return float(sum(cumulative[hi] - cumulative[lo - 1] for lo, hi in ladder.excursions()))


def upcrossing_ladder_bound(values, h1: float, h2: float) -> int:
    '''
    1 + #{k >= 2 : x(mu_{3k-1,T}) >= h2}, an upper bound on the up-crossings of (h1, h2)
    '''
    x = np.asarray(values, dtype=np.float64)
    ladder = ladder_from_gaps(x, h1, h2)
    count = 0
    for k, (start, stop, _) in enumerate(ladder.triples(), start=1):
        if k >= 2 and math.isfinite(start) and x[int(min(stop, ladder.T)) - 1] >= h2:
            count += 1
    return 1 + count


def tau_ladder(values, a: float, b: float, c: float, T: int | None = None) -> np.ndarray:
    '''
    Four-level ladder over x = f - f* for levels a < b < c, in groups of four:

        tau_{4i-3} = min{t >= tau_{4i-4} : x_t >= a}
        tau_{4i-2} = min{t >= tau_{4i-3} : x_t >= b or x_t < a}
        tau_{4i-1} = min{t >= tau_{4i-2} : x_t >= c or x_t < a}
        tau_{4i}   = min{t >= tau_{4i-1} : x_t < a}

    1-based times, +inf past the data, ending after the first infinite time.
    '''
    if not a < b < c:
        raise ValueError(f"tau ladder needs a < b < c, got a={a}, b={b}, c={c}")
    x = np.asarray(values, dtype=np.float64)
    if T is not None:
        x = x[:T]
    tables = (_next_true(x >= a),
              _next_true((x >= b) | (x < a)),
              _next_true((x >= c) | (x < a)),
              _next_true(x < a))
    return np.asarray(_cycle_times(tables))


def tau_excursions(times, T: int) -> list[tuple[int, int]]:
    '''
    non-empty ranges [tau_{4i-2,T}, tau_{4i-1,T} - 1]: the stretches after reaching b that end
    at c or below a
    '''
    times = np.asarray(times, dtype=np.float64)
    padded = np.concatenate([times, np.full((-len(times)) % 4, math.inf)])
    segments = []
    for k in range(0, len(padded), 4):
        lo = int(min(padded[k + 1], T))
        hi = int(min(padded[k + 2], T)) - 1
        if lo <= hi:
            segments.append((lo, hi))
    return segments
