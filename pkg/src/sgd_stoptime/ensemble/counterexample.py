# Copyright 2025 The sgd_stoptime Authors

'''
Two-point law zeta_n with P(zeta_n = n) = 1/n^2, P(zeta_n = 0) = 1 - 1/n^2: the sequence goes
to 0 almost surely while E|zeta_n|^2 = 1 for every n. It separates the two convergence modes
the ensemble checks estimate and does not drive any oracle.
'''

import numpy as np

from sgd_stoptime.ensemble.stats import mean_stderr
from sgd_stoptime.model.oracle import make_stream


class TwoPointLaw:
    def __init__(self, n: int) -> None:
        if n < 1:
            raise ValueError(f"The two-point law needs n >= 1, got {n}")
        self.n = int(n)
        self.atom = self.n
        self.p_atom = 1.0 / self.n**2
        self.p_zero = 1.0 - self.p_atom
        # atom^2 * P(atom)
        self.second_moment_exact = self.atom**2 / self.n**2

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.where(rng.random(size) < self.p_atom, float(self.atom), 0.0)

    def to_dict(self) -> dict:
        return {"n": self.n, "p_zero": self.p_zero, "atom": self.atom, "second_moment_exact": self.second_moment_exact}


def counterexample_distribution(n: int) -> TwoPointLaw:
    return TwoPointLaw(n)


def tail_event_fraction(k: int, N: int, n_paths: int, seed: int) -> dict:
    '''
    Fraction of independent paths (zeta_n)_{n <= N} with a nonzero draw at some n in (k, N].

    Per n only the number of hits is drawn (binomial) and then spread over distinct paths,
    so the cost follows the expected number of hits rather than n_paths * N.
    '''
    if not 1 <= k < N:
        raise ValueError(f"tail_event_fraction needs 1 <= k < N, got k={k}, N={N}")
    if n_paths < 2:
        raise ValueError(f"tail_event_fraction needs n_paths >= 2, got {n_paths}")
    rng = make_stream(seed, 0)
    ns = np.arange(k + 1, N + 1, dtype=np.float64)
    probs = 1.0 / ns**2
    hits = rng.binomial(n_paths, probs)
    seen = np.zeros(n_paths, dtype=bool)
    for count in hits[hits > 0]:
        seen[rng.choice(n_paths, size=int(count), replace=False)] = True
    fraction, stderr = mean_stderr(seen.astype(np.float64))
    exact = 1.0 - k * (N + 1) / ((k + 1) * N)
    if stderr > 0.0:
        consistent = abs(fraction - exact) <= 3.0 * stderr
    else:
        consistent = fraction == 0.0
    return {
        "k": k,
        "N": N,
        "n_paths": n_paths,
        "fraction": fraction,
        "stderr": stderr,
        "tail_sum_bound": float(np.sum(probs)),
        "exact": exact,
        "one_over_k": 1.0 / k,
        "within_3_stderr": consistent,
    }
