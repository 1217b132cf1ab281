# Copyright 2025 The sgd_stoptime Authors

import math

import numpy as np
from scipy import special

import sgd_stoptime.logger as sglog
from sgd_stoptime.constants import (
    MOMENT_DRAW_SIZES,
    MOMENT_STABILIZATION_TOL,
    UNBIASED_Z_LIMIT,
    WEAK_GROWTH_SLACK,
)
from sgd_stoptime.diagnostics.report import (
    DiagnosticResult,
    STATUS_EMPTY_REGION,
    STATUS_NOT_EVALUABLE,
)
from sgd_stoptime.model.problem import Problem
from sgd_stoptime.types import Vector


# draws per chunk when estimating moments
_MOMENT_CHUNK = 10**5


def make_stream(seed: int, stream_index: int) -> np.random.Generator:
    '''
    independent generator per (seed, stream index); the same pair always gives the same stream
    '''
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(stream_index)])))


class GradientOracle:
    '''
    Abstract stochastic gradient generator with declared moment constants

      G      weak growth constant, E||g||^2 <= G (||grad f||^2 + 1)
      p      moment order shared with the schedule
      M0     bound on the p-th moment of ||g|| in the sublevel region f - f* < D_eta
      M1     bound on the (2p-2)-th moment of ||g|| in S_delta
      delta  radius of S_delta around the critical values

    Subclasses implement _perturb(grad, rng, n) returning n samples of shape (n, d).
    '''
    name = "abstract"

    def __init__(self, G: float = 1.0, p: float = 3.0, M0: float = 10.0, M1: float = 50.0, delta: float = 0.05) -> None:
        if not p > 2.0:
            raise ValueError(f"Oracle moment order p must be > 2, got {p}")
        for key, val in (("G", G), ("M0", M0), ("M1", M1), ("delta", delta)):
            if not val > 0.0:
                raise ValueError(f"Declared oracle constant {key} must be positive, got {val}")
        self.declared_G = float(G)
        self.declared_p = float(p)
        self.declared_M0 = float(M0)
        self.declared_M1 = float(M1)
        self.declared_delta = float(delta)

    def _perturb(self, grad: Vector, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError("Class %s doesn't implement _perturb()" % (self.__class__.__name__))

    def params(self) -> dict:
        return {}

    def describe(self) -> dict:
        desc = {"oracle": self.name,
                "G": self.declared_G, "p": self.declared_p,
                "M0": self.declared_M0, "M1": self.declared_M1, "delta": self.declared_delta}
        desc.update(self.params())
        return desc

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}({self.describe()})"

    def analytic_G(self, problem: Problem) -> float | None:
        return None

    def consistency_check(self, problem: Problem) -> bool:
        '''
        warn when the declared weak growth constant is below the closed-form value
        '''
        analytic = self.analytic_G(problem)
        if analytic is not None and self.declared_G < analytic * (1.0 - 1e-12):
            sglog.log(sglog.WARN, f"{self.name}: declared G={self.declared_G:g} is below the analytic value {analytic:g}"
                                  f" on {problem.name}")
            return False
        return True

    def moment_bound(self, order: float) -> float:
        if math.isclose(order, self.declared_p):
            return self.declared_M0 ** self.declared_p
        if math.isclose(order, 2.0 * self.declared_p - 2.0):
            return self.declared_M1 ** (2.0 * self.declared_p - 2.0)
        raise ValueError(f"Moment order {order} is neither p={self.declared_p:g} nor 2p-2={2 * self.declared_p - 2:g}")

    def sample(self, problem: Problem, theta: Vector, rng: np.random.Generator, grad: Vector | None = None) -> Vector:
        if grad is None:
            grad = problem.gradient(theta)
        return self._perturb(grad, rng, 1)[0]

    def sample_batch(self, problem: Problem, theta: Vector, rng: np.random.Generator, n: int) -> np.ndarray:
        return self._perturb(problem.gradient(theta), rng, n)


class AdditiveGaussianOracle(GradientOracle):
    '''
    g = grad f + bias + sigma Z; any non-zero bias breaks unbiasedness on purpose
    '''
    name = "additive_gaussian"

    def __init__(self, sigma: float, bias: float = 0.0, **declared) -> None:
        super().__init__(**declared)
        if sigma < 0.0:
            raise ValueError(f"sigma must be >= 0, got {sigma}")
        self.sigma = float(sigma)
        self.bias = float(bias)
        if self.bias != 0.0:
            sglog.log(sglog.WARN, f"{self.name}: debug bias {self.bias:g} enabled, samples are biased")

    def params(self) -> dict:
        return {"sigma": self.sigma, "bias": self.bias}

    def _perturb(self, grad: Vector, rng: np.random.Generator, n: int) -> np.ndarray:
        return grad + self.bias + self.sigma * rng.standard_normal((n, grad.shape[0]))

    def analytic_G(self, problem: Problem) -> float | None:
        if self.bias != 0.0:
            return None
        return max(1.0, self.sigma**2 * problem.dimension)


class AdditiveStudentTOracle(GradientOracle):
    name = "additive_student_t"

    def __init__(self, dof: float, scale: float = 1.0, **declared) -> None:
        super().__init__(**declared)
        if not dof > 2.0:
            raise ValueError(f"Student-t noise needs dof > 2 for a finite variance, got {dof}")
        self.dof = float(dof)
        self.scale = float(scale)

    def params(self) -> dict:
        return {"dof": self.dof, "scale": self.scale}

    def _perturb(self, grad: Vector, rng: np.random.Generator, n: int) -> np.ndarray:
        return grad + self.scale * rng.standard_t(self.dof, size=(n, grad.shape[0]))

    def analytic_G(self, problem: Problem) -> float:
        variance = self.scale**2 * self.dof / (self.dof - 2.0)
        return max(1.0, variance * problem.dimension)


class MultiplicativeGaussianOracle(GradientOracle):
    '''
    g = grad f * (1 + sigma Z) + sigma Z' with independent standard normal vectors Z, Z'
    '''
    name = "multiplicative_gaussian"

    def __init__(self, sigma: float, **declared) -> None:
        super().__init__(**declared)
        if sigma < 0.0:
            raise ValueError(f"sigma must be >= 0, got {sigma}")
        self.sigma = float(sigma)

    def params(self) -> dict:
        return {"sigma": self.sigma}

    def _perturb(self, grad: Vector, rng: np.random.Generator, n: int) -> np.ndarray:
        d = grad.shape[0]
        scaled = grad * (1.0 + self.sigma * rng.standard_normal((n, d)))
        return scaled + self.sigma * rng.standard_normal((n, d))

    def analytic_G(self, problem: Problem) -> float:
        # E||g||^2 = (1 + sigma^2) ||grad f||^2 + sigma^2 d
        return max(1.0 + self.sigma**2, self.sigma**2 * problem.dimension)


class ParetoAdditiveOracle(GradientOracle):
    '''
    Heavy tailed additive noise: random sign times a centered Lomax(alpha) draw.
    Moments of order k are finite iff k < alpha.
    '''
    name = "pareto_additive"

    def __init__(self, alpha: float, scale: float = 1.0, centered: bool = True, **declared) -> None:
        super().__init__(**declared)
        if not centered:
            raise ValueError("Uncentered heavy tailed noise is biased; only centered=True is supported")
        if not alpha > 2.0:
            raise ValueError(f"Pareto noise needs alpha > 2 for a finite variance, got {alpha}")
        self.alpha = float(alpha)
        self.scale = float(scale)
        self.centered = centered

    def params(self) -> dict:
        return {"alpha": self.alpha, "scale": self.scale, "centered": self.centered}

    def _perturb(self, grad: Vector, rng: np.random.Generator, n: int) -> np.ndarray:
        shape = (n, grad.shape[0])
        draws = rng.pareto(self.alpha, size=shape) - 1.0 / (self.alpha - 1.0)
        signs = 2.0 * rng.integers(0, 2, size=shape) - 1.0
        return grad + self.scale * signs * draws

    def analytic_G(self, problem: Problem) -> float:
        a = self.alpha
        variance = self.scale**2 * a / ((a - 1.0) ** 2 * (a - 2.0))
        return max(1.0, variance * problem.dimension)


class FiniteSumOracle(GradientOracle):
    '''
    Synthetic finite sum: component gradients grad f + b_i with sum_i b_i = 0.
    A sample averages batch_size components drawn without replacement.
    '''
    name = "finite_sum"

    def __init__(self,
                 n_components: int,
                 batch_size: int,
                 spread: float = 1.0,
                 component_seed: int = 0,
                 **declared) -> None:
        super().__init__(**declared)
        if n_components < 1 or not 1 <= batch_size <= n_components:
            raise ValueError(f"Need 1 <= batch_size <= n_components, got {batch_size} and {n_components}")
        self.n_components = int(n_components)
        self.batch_size = int(batch_size)
        self.spread = float(spread)
        self.component_seed = int(component_seed)
        self._offsets: dict[int, np.ndarray] = {}

    def params(self) -> dict:
        return {"n_components": self.n_components, "batch_size": self.batch_size,
                "spread": self.spread, "component_seed": self.component_seed}

    def offsets(self, d: int) -> np.ndarray:
        if d not in self._offsets:
            rng = np.random.default_rng(self.component_seed)
            b = self.spread * rng.standard_normal((self.n_components, d))
            b -= b.mean(axis=0)
            self._offsets[d] = b
        return self._offsets[d]

    def _perturb(self, grad: Vector, rng: np.random.Generator, n: int) -> np.ndarray:
        d = grad.shape[0]
        if self.batch_size == self.n_components:
            return np.repeat(grad[None, :], n, axis=0)
        offsets = self.offsets(d)
        chunk = max(1, 10**6 // self.n_components)
        samples = np.empty((n, d))
        for start in range(0, n, chunk):
            stop = min(n, start + chunk)
            keys = rng.random((stop - start, self.n_components))
            picked = np.argpartition(keys, self.batch_size - 1, axis=1)[:, :self.batch_size]
            samples[start:stop] = grad + offsets[picked].mean(axis=1)
        return samples

    def analytic_G(self, problem: Problem) -> float:
        n, b = self.n_components, self.batch_size
        if n == 1 or b == n:
            return 1.0
        mean_sq = float(np.mean(np.sum(self.offsets(problem.dimension) ** 2, axis=1)))
        # sampling without replacement: finite population correction (n - b) / (n - 1)
        return max(1.0, mean_sq * (n - b) / ((n - 1) * b))


def check_unbiased(oracle: GradientOracle, problem: Problem, theta, n: int, seed: int) -> DiagnosticResult:
    if n < 100:
        raise ValueError(f"check_unbiased needs n >= 100 draws, got {n}")
    theta = problem._as_point(theta)
    grad = problem.gradient(theta)
    samples = oracle.sample_batch(problem, theta, make_stream(seed, 0), n)

    constant = np.ptp(samples, axis=0) == 0.0
    diff = samples.mean(axis=0) - grad
    stderr = samples.std(axis=0, ddof=1) / math.sqrt(n)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(constant,
                     np.where(samples[0] == grad, 0.0, np.inf),
                     diff / stderr)
    max_z = float(np.max(np.abs(z)))
    return DiagnosticResult("unbiased",
                            {"oracle": oracle.name, "n": n, "seed": seed},
                            value=max_z,
                            tolerance=UNBIASED_Z_LIMIT,
                            passed=max_z <= UNBIASED_Z_LIMIT,
                            details={"z": z})


def check_weak_growth(oracle: GradientOracle, problem: Problem, points, n: int, seed: int) -> DiagnosticResult:
    batch = problem._as_batch(points)
    ratios = np.empty(len(batch))
    for i, theta in enumerate(batch):
        grad = problem.gradient(theta)
        samples = oracle.sample_batch(problem, theta, make_stream(seed, i), n)
        ratios[i] = np.mean(np.sum(samples**2, axis=1)) / (float(grad @ grad) + 1.0)
    G_hat = float(np.max(ratios))
    limit = oracle.declared_G * (1.0 + WEAK_GROWTH_SLACK)
    return DiagnosticResult("weak_growth",
                            {"oracle": oracle.name, "n": n, "points": len(batch), "seed": seed},
                            value=G_hat,
                            tolerance=limit,
                            passed=G_hat <= limit,
                            details={"declared_G": oracle.declared_G, "worst_point": int(np.argmax(ratios))})


def hill_tail_index(samples, k: int | None = None) -> float:
    '''
    Hill estimate of the tail index from the k largest positive samples (default k = sqrt(n)).
    '''
    data = np.sort(np.asarray(samples, dtype=np.float64)[np.asarray(samples) > 0.0])[::-1]
    if k is None:
        k = int(math.sqrt(len(data)))
    if k < 2 or k >= len(data):
        return math.nan
    logs = np.log(data[:k] / data[k])
    mean_log = float(np.mean(logs))
    return math.inf if mean_log == 0.0 else 1.0 / mean_log


def _region_mask(problem: Problem, region: str, f_vals: np.ndarray, delta: float) -> np.ndarray:
    if region == "sublevel":
        return f_vals - problem.f_star < problem.D_eta
    cvals = problem.critical_values
    return np.min(np.abs(f_vals[:, None] - cvals[None, :]), axis=1) < delta


def _prefix_moments(oracle, problem, theta, rng, order, draw_sizes) -> tuple[np.ndarray, np.ndarray]:
    '''
    mean ||g||^order over nested prefixes of one stream of draws, plus the norms of the tail sample
    '''
    largest = max(draw_sizes)
    grad = problem.gradient(theta)
    running = 0.0
    done = 0
    estimates = []
    last_norms = None
    for size in sorted(draw_sizes):
        while done < size:
            take = min(_MOMENT_CHUNK, size - done)
            norms = np.linalg.norm(oracle._perturb(grad, rng, take), axis=1)
            running += float(np.sum(norms**order))
            done += take
            if done == largest:
                last_norms = norms
        estimates.append(running / size)
    return np.asarray(estimates), last_norms


def check_local_moments(oracle: GradientOracle,
                        problem: Problem,
                        region: str,
                        order: float,
                        sampler,
                        n_points: int,
                        draw_sizes=MOMENT_DRAW_SIZES,
                        seed: int = 0) -> DiagnosticResult:
    '''
    Conditional moment of ||g|| in a region, estimated with fresh draws at fixed region points.

    Divergence is a heuristic: an estimate still growing by more than the stabilization
    tolerance between consecutive draw sizes counts as a non-finite moment. A Hill
    estimate of the tail index is reported next to it.
    '''
    if region not in ("sublevel", "s_delta"):
        raise ValueError(f"Unknown region '{region}', expected 'sublevel' or 's_delta'")
    bound = oracle.moment_bound(order)
    params = {"oracle": oracle.name, "region": region, "order": order, "n_points": n_points,
              "draw_sizes": list(draw_sizes), "seed": seed}

    if region == "s_delta" and problem.critical_values is None:
        return DiagnosticResult.open("local_moments", params, STATUS_NOT_EVALUABLE,
                                     f"{problem.name} has no certified critical values, S_delta is not observable")

    rng = make_stream(seed, 0)
    candidates = sampler(rng, 20 * n_points, problem.dimension)
    inside = candidates[_region_mask(problem, region, problem.values(candidates), oracle.declared_delta)][:n_points]
    if len(inside) == 0:
        return DiagnosticResult.open("local_moments", params, STATUS_EMPTY_REGION,
                                     f"no sampled point of {len(candidates)} fell into the {region} region")

    per_point = []
    hill = []
    for i, theta in enumerate(inside):
        estimates, norms = _prefix_moments(oracle, problem, theta, make_stream(seed, i + 1), order, draw_sizes)
        per_point.append(estimates)
        hill.append(hill_tail_index(norms))
    per_point = np.asarray(per_point)
    growth = float(np.max(per_point[:, 1:] / per_point[:, :-1] - 1.0)) if per_point.shape[1] > 1 else 0.0
    stabilized = growth <= MOMENT_STABILIZATION_TOL
    estimate = float(np.max(per_point[:, -1]))
    if not stabilized:
        sglog.log(sglog.DEBUG, f"{oracle.name}: order {order} moment keeps growing ({growth:.3f}) across {list(draw_sizes)}")

    return DiagnosticResult("local_moments", params,
                            value=estimate,
                            tolerance=bound,
                            passed=stabilized and estimate <= bound,
                            details={"points_in_region": len(inside),
                                     "estimates": np.max(per_point, axis=0),
                                     "max_relative_growth": growth,
                                     "stabilized": stabilized,
                                     "hill_alpha": float(np.nanmin(hill)) if not np.all(np.isnan(hill)) else math.nan,
                                     "heuristic": "non-stabilization across draw sizes marks a diverging moment"})


def gaussian_moment_bound(order: float, grad_norm_bound: float, sigma: float, d: int) -> float:
    '''
    Minkowski bound (||grad f|| + sigma (E||Z||^k)^(1/k))^k with chi moments
    E||Z||^k = 2^(k/2) Gamma((d+k)/2) / Gamma(d/2).
    '''
    k = float(order)
    log_chi = 0.5 * k * math.log(2.0) + special.gammaln(0.5 * (d + k)) - special.gammaln(0.5 * d)
    return (grad_norm_bound + sigma * math.exp(log_chi / k)) ** k


_ORACLE_FIELDS = {
    "additive_gaussian": (AdditiveGaussianOracle, {"sigma": 0.0, "bias": 0.0}),
    "additive_student_t": (AdditiveStudentTOracle, {"dof": 5.0, "scale": 1.0}),
    "multiplicative_gaussian": (MultiplicativeGaussianOracle, {"sigma": 0.0}),
    "pareto_additive": (ParetoAdditiveOracle, {"alpha": 3.5, "scale": 1.0, "centered": True}),
    "finite_sum": (FiniteSumOracle, {"n_components": 100, "batch_size": 1, "spread": 1.0, "component_seed": 0}),
}
_DECLARED_FIELDS = {"G": 1.0, "p": 3.0, "M0": 10.0, "M1": 50.0, "delta": 0.05}


def oracle_from_dict(spec: dict) -> GradientOracle:
    '''
    Build an oracle from its config form, e.g. {"oracle": "additive_gaussian", "sigma": 0.1, "G": 1.0}
    '''
    spec = dict(spec)
    name = spec.pop("oracle", None)
    if name not in _ORACLE_FIELDS:
        raise KeyError(f"Unknown oracle '{name}'. Valid oracles are: {sorted(_ORACLE_FIELDS)}")
    cls, fields = _ORACLE_FIELDS[name]
    valid = set(fields) | set(_DECLARED_FIELDS)
    invalid = set(spec) - valid
    if invalid:
        raise ValueError(
            f"Invalid attributes in oracle: {sorted(invalid)}. "
            f"Valid attributes are: {sorted(valid)}")
    args = dict(_DECLARED_FIELDS)
    args.update(fields)
    args.update(spec)
    return cls(**args)
