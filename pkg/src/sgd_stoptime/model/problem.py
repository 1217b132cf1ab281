# Copyright 2025 The sgd_stoptime Authors

import functools
import itertools
import math
from typing import Iterator

import numpy as np
from scipy import optimize

import sgd_stoptime.logger as sglog
from sgd_stoptime.constants import (
    COERCIVITY_PROBE_RADII,
    LEVEL_PROBE_RADII,
    LIPSCHITZ_CLOSE_PAIR_STEP,
)
from sgd_stoptime.types import Vector


class Problem:
    '''
    Abstract objective with certified constants

    The constants are data, not estimates:
      f_star        infimum of f
      lipschitz_L   Lipschitz constant of the gradient
      eta, D_eta    ||grad f(x)|| < eta implies f(x) - f_star < D_eta
    critical_values lists f on the critical set (None when unknown).

    Subclasses implement _value() and _gradient() so that they work on a single point
    of shape (d,) as well as on a batch of shape (n, d).
    '''
    name = "abstract"
    satisfies_level_bound = True

    def __init__(self,
                 dimension: int,
                 f_star: float,
                 lipschitz_L: float,
                 eta: float,
                 D_eta: float,
                 coercive: bool,
                 smoothness_order: int | None = None) -> None:
        if dimension < 1:
            raise ValueError(f"Problem dimension must be >= 1, got {dimension}")
        if not lipschitz_L > 0.0 or not eta > 0.0 or not D_eta > 0.0:
            raise ValueError(f"Certified constants must be positive: L={lipschitz_L}, eta={eta}, D_eta={D_eta}")
        self.dimension = int(dimension)
        self.f_star = float(f_star)
        self.lipschitz_L = float(lipschitz_L)
        self.eta = float(eta)
        self.D_eta = float(D_eta)
        self.coercive = coercive
        # recorded, never verified
        self.smoothness_order = smoothness_order
        self.certificate_notes: list[str] = []

    def _value(self, theta: np.ndarray) -> np.ndarray | float:
        raise NotImplementedError("Class %s doesn't implement _value()" % (self.__class__.__name__))

    def _gradient(self, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError("Class %s doesn't implement _gradient()" % (self.__class__.__name__))

    def params(self) -> dict:
        return {"d": self.dimension, "eta": self.eta}

    def describe(self) -> dict:
        desc = {"problem": self.name}
        desc.update(self.params())
        return desc

    @property
    def critical_values(self) -> np.ndarray | None:
        return None

    def critical_points(self, limit: int | None = None) -> Iterator[Vector]:
        return iter(())

    def _as_point(self, theta) -> Vector:
        point = np.asarray(theta, dtype=np.float64)
        if point.shape != (self.dimension,):
            raise ValueError(f"{self.name}: expected a point of dimension {self.dimension}, got shape {point.shape}")
        return point

    def _as_batch(self, points) -> np.ndarray:
        batch = np.asarray(points, dtype=np.float64)
        if batch.ndim != 2 or batch.shape[1] != self.dimension:
            raise ValueError(f"{self.name}: expected points of shape (n, {self.dimension}), got {batch.shape}")
        return batch

    def value(self, theta) -> float:
        return float(self._value(self._as_point(theta)))

    def gradient(self, theta) -> Vector:
        return self._gradient(self._as_point(theta))

    def values(self, points) -> np.ndarray:
        return np.asarray(self._value(self._as_batch(points)), dtype=np.float64)

    def gradients(self, points) -> np.ndarray:
        return self._gradient(self._as_batch(points))

    # unchecked fast path for the SGD inner loop
    def evaluate(self, theta: Vector) -> tuple[float, Vector]:
        return float(self._value(theta)), self._gradient(theta)

    def nearest_critical_value(self, f_val: float) -> float | None:
        cvals = self.critical_values
        if cvals is None or len(cvals) == 0:
            return None
        return float(cvals[np.argmin(np.abs(cvals - f_val))])


class QuadraticProblem(Problem):
    '''
    f(x) = 1/2 x^T A x for symmetric positive definite A
    '''
    name = "quadratic"

    def __init__(self, A, eta: float = 1.0) -> None:
        matrix = np.atleast_2d(np.asarray(A, dtype=np.float64))
        if matrix.shape[0] != matrix.shape[1] or not np.allclose(matrix, matrix.T):
            raise ValueError("Quadratic needs a symmetric square matrix")
        eigenvalues = np.linalg.eigvalsh(matrix)
        if eigenvalues[0] <= 0.0:
            raise ValueError(f"Quadratic needs a positive definite matrix, smallest eigenvalue {eigenvalues[0]}")
        self.A = matrix
        self.eigenvalues = eigenvalues
        # ||Ax|| < eta  =>  f = 1/2 (Ax)^T A^-1 (Ax) < eta^2 / (2 lambda_min)
        super().__init__(dimension=matrix.shape[0],
                         f_star=0.0,
                         lipschitz_L=float(eigenvalues[-1]),
                         eta=eta,
                         D_eta=eta**2 / (2.0 * float(eigenvalues[0])),
                         coercive=True,
                         smoothness_order=None)
        self.certificate_notes.append("closed form: L = largest eigenvalue, Crit = {0}")

    @classmethod
    def isotropic(cls, d: int, c: float = 1.0, eta: float = 1.0) -> "QuadraticProblem":
        return cls(c * np.eye(d), eta=eta)

    def params(self) -> dict:
        return {"A": self.A.tolist(), "eta": self.eta}

    @property
    def condition_number(self) -> float:
        return float(self.eigenvalues[-1] / self.eigenvalues[0])

    def _value(self, theta: np.ndarray):
        return 0.5 * np.sum(theta * (theta @ self.A), axis=-1)

    def _gradient(self, theta: np.ndarray) -> np.ndarray:
        return theta @ self.A

    @property
    def critical_values(self) -> np.ndarray:
        return np.zeros(1)

    def critical_points(self, limit: int | None = None) -> Iterator[Vector]:
        yield np.zeros(self.dimension)


class HighCondQuadraticProblem(QuadraticProblem):
    name = "high_cond_quadratic"

    def __init__(self, d: int = 10, eta: float = 1.0, condition: float = 1e3) -> None:
        if d < 2:
            raise ValueError("A conditioned quadratic needs d >= 2")
        super().__init__(np.diag(np.geomspace(1.0 / condition, 1.0, d)), eta=eta)
        self.condition = float(condition)

    def params(self) -> dict:
        return {"d": self.dimension, "eta": self.eta, "condition": self.condition}


@functools.lru_cache(maxsize=1)
def cos_quadratic_root() -> float:
    '''
    positive root r of r = 2 sin r, located in (1.8, 2.0)
    '''
    root = optimize.bisect(lambda x: x - 2.0 * math.sin(x), 1.8, 2.0, xtol=1e-13)
    sglog.log(sglog.DEBUG, "cos_quadratic root r =", root)
    return float(root)


class CosQuadraticProblem(Problem):
    '''
    f(x) = sum_i (x_i^2 / 2 + 2 cos x_i - c0), non-convex with f* = 0

    Per coordinate the critical points are 0 (local maximum) and +/- r with r = 2 sin r,
    so Crit(f) = {0, r, -r}^d and f takes the values k (2 - c0) with k zero coordinates.
    The second derivative 1 - 2 cos x lies in [-1, 3], hence L = 3.
    '''
    name = "cos_quadratic"

    def __init__(self, d: int = 10, eta: float = 1.0) -> None:
        self.r = cos_quadratic_root()
        self.c0 = 0.5 * self.r**2 + 2.0 * math.cos(self.r)
        # |x - 2 sin x| < eta  =>  |x| < 2 + eta
        d_eta = d * (0.5 * (2.0 + eta) ** 2 + 2.0 - self.c0)
        super().__init__(dimension=d, f_star=0.0, lipschitz_L=3.0, eta=eta, D_eta=d_eta,
                         coercive=True, smoothness_order=None)
        self.certificate_notes.append(f"r = {self.r!r} by bisection, c0 = {self.c0!r}")

    def _value(self, theta: np.ndarray):
        return np.sum(0.5 * theta**2 + 2.0 * np.cos(theta) - self.c0, axis=-1)

    def _gradient(self, theta: np.ndarray) -> np.ndarray:
        return theta - 2.0 * np.sin(theta)

    @property
    def critical_values(self) -> np.ndarray:
        return np.arange(self.dimension + 1) * (2.0 - self.c0)

    def critical_points(self, limit: int | None = None) -> Iterator[Vector]:
        points = itertools.product((0.0, self.r, -self.r), repeat=self.dimension)
        for point in itertools.islice(points, limit):
            yield np.array(point)


class NonCoerciveDemo(Problem):
    '''
    f(x) = sum_i log(1 + x_i^2)

    The gradient vanishes at infinity while f grows without bound, so no finite D_eta
    exists for small eta. Only used to demonstrate a failing assumption certificate.
    '''
    name = "non_coercive_demo"
    satisfies_level_bound = False

    def __init__(self, d: int = 2, eta: float = 0.01, D_eta: float = 10.0) -> None:
        super().__init__(dimension=d, f_star=0.0, lipschitz_L=2.0, eta=eta, D_eta=D_eta,
                         coercive=True, smoothness_order=None)
        self.certificate_notes.append("level bound violated: ||grad f|| -> 0 while f -> inf along rays")

    def params(self) -> dict:
        return {"d": self.dimension, "eta": self.eta, "D_eta": self.D_eta}

    def _value(self, theta: np.ndarray):
        return np.sum(np.log1p(theta**2), axis=-1)

    def _gradient(self, theta: np.ndarray) -> np.ndarray:
        return 2.0 * theta / (1.0 + theta**2)

    @property
    def critical_values(self) -> np.ndarray:
        return np.zeros(1)

    def critical_points(self, limit: int | None = None) -> Iterator[Vector]:
        yield np.zeros(self.dimension)


class ScaledLProblem(Problem):
    '''
    Debug fixture: wraps a problem and declares factor * L (factor < 1 understates L).
    '''
    name = "scaled_L"

    def __init__(self, base: Problem, factor: float) -> None:
        super().__init__(dimension=base.dimension, f_star=base.f_star,
                         lipschitz_L=base.lipschitz_L * factor, eta=base.eta, D_eta=base.D_eta,
                         coercive=base.coercive, smoothness_order=base.smoothness_order)
        self.base = base
        self.factor = float(factor)
        sglog.log(sglog.WARN, f"Debug problem {base.name} declares L scaled by {factor}")

    def params(self) -> dict:
        return {"base": self.base.describe(), "factor": self.factor}

    def _value(self, theta: np.ndarray):
        return self.base._value(theta)

    def _gradient(self, theta: np.ndarray) -> np.ndarray:
        return self.base._gradient(theta)

    @property
    def critical_values(self) -> np.ndarray | None:
        return self.base.critical_values

    def critical_points(self, limit: int | None = None) -> Iterator[Vector]:
        return self.base.critical_points(limit)


class UnitBallSampler:
    '''
    uniform points in the ball of the given radius around the origin
    '''
    def __init__(self, radius: float = 1.0) -> None:
        self.radius = float(radius)

    def __call__(self, rng: np.random.Generator, n: int, d: int) -> np.ndarray:
        directions = rng.standard_normal((n, d))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        radii = self.radius * rng.random(n) ** (1.0 / d)
        return directions * radii[:, None]


class BoxSampler:
    def __init__(self, half_width: float = 1.0) -> None:
        self.half_width = float(half_width)

    def __call__(self, rng: np.random.Generator, n: int, d: int) -> np.ndarray:
        return rng.uniform(-self.half_width, self.half_width, size=(n, d))


class AssumptionReport:
    '''
    Outcome of the sampled certificate checks: one boolean per assumption plus a witness
    point for each failure. The coercivity entry is a probe along rays, not a proof.
    '''
    CHECKS = ("lower_bound", "lipschitz", "coercive_probe", "level_bound")

    def __init__(self, problem_name: str) -> None:
        self.problem_name = problem_name
        self.results: dict[str, bool] = {}
        self.witnesses: dict[str, list[float]] = {}
        self.max_lipschitz_ratio = 0.0
        self.notes: list[str] = []

    def record(self, check: str, passed: bool, witness: Vector | None = None) -> None:
        self.results[check] = bool(passed)
        if not passed and witness is not None:
            self.witnesses[check] = [float(v) for v in witness]

    @property
    def passed(self) -> bool:
        return all(self.results.get(c, False) for c in self.CHECKS)

    def to_dict(self) -> dict:
        return {
            "problem": self.problem_name,
            "results": dict(self.results),
            "witnesses": dict(self.witnesses),
            "max_lipschitz_ratio": self.max_lipschitz_ratio,
            "notes": list(self.notes),
        }


def _random_directions(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    directions = rng.standard_normal((n, d))
    return directions / np.linalg.norm(directions, axis=1, keepdims=True)


def check_assumption_31(problem: Problem, sampler, n_samples: int, rng_seed: int) -> AssumptionReport:
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    rng = np.random.default_rng(rng_seed)
    d = problem.dimension
    report = AssumptionReport(problem.name)

    points = sampler(rng, n_samples, d)
    f_vals = problem.values(points)
    grads = problem.gradients(points)

    # lower bound
    worst = int(np.argmin(f_vals))
    report.record("lower_bound",
                  f_vals[worst] >= problem.f_star - 1e-12 * (1.0 + abs(problem.f_star)),
                  points[worst])

    # Lipschitz gradient on disjoint random pairs plus close pairs
    half = n_samples // 2
    left = [points[0:2 * half:2]]
    right = [points[1:2 * half:2]]
    shifted = points + LIPSCHITZ_CLOSE_PAIR_STEP * _random_directions(rng, n_samples, d)
    left.append(points)
    right.append(shifted)
    x1 = np.concatenate(left)
    x2 = np.concatenate(right)
    dist = np.linalg.norm(x1 - x2, axis=1)
    ratios = np.linalg.norm(problem.gradients(x1) - problem.gradients(x2), axis=1) / np.where(dist > 0, dist, np.inf)
    worst = int(np.argmax(ratios))
    report.max_lipschitz_ratio = float(ratios[worst])
    report.record("lipschitz",
                  ratios[worst] <= problem.lipschitz_L * (1.0 + 1e-9) + 1e-12,
                  x1[worst])

    # coercivity probe: f strictly increasing along random rays
    rays = _random_directions(rng, min(n_samples, 64), d)
    radii = np.asarray(COERCIVITY_PROBE_RADII)
    along = np.stack([problem.values(rays * r) for r in radii], axis=1)
    increasing = np.all(np.diff(along, axis=1) > 0.0, axis=1) & (along[:, 0] > np.max(f_vals))
    failing = np.flatnonzero(~increasing)
    report.record("coercive_probe", len(failing) == 0,
                  rays[failing[0]] * radii[-1] if len(failing) else None)
    report.notes.append(f"coercivity probed along {len(rays)} rays at radii {list(COERCIVITY_PROBE_RADII)}; "
                        "a probe cannot prove coercivity")

    # (eta, D_eta) implication at samples and along axis and random rays far out
    far_dirs = np.concatenate([np.eye(d), rays])
    far = np.concatenate([far_dirs * r for r in LEVEL_PROBE_RADII])
    candidates = np.concatenate([points, far])
    cand_f = np.concatenate([f_vals, problem.values(far)])
    cand_g = np.linalg.norm(np.concatenate([grads, problem.gradients(far)]), axis=1)
    small_grad = cand_g < problem.eta
    violating = np.flatnonzero(small_grad & ~(cand_f - problem.f_star < problem.D_eta))
    if len(violating):
        worst = violating[int(np.argmax(cand_f[violating]))]
        report.record("level_bound", False, candidates[worst])
        sglog.log(sglog.DEBUG, f"{problem.name}: level bound violated at |theta|={np.linalg.norm(candidates[worst]):g}"
                               f" with f-f*={cand_f[worst] - problem.f_star:g} >= D_eta={problem.D_eta:g}")
    else:
        report.record("level_bound", True)

    report.notes.extend(problem.certificate_notes)
    return report


def gradient_consistency(problem: Problem, points, h: float = 1e-6) -> float:
    '''
    max over points of ||central difference - gradient|| / (1 + ||gradient||)
    '''
    batch = problem._as_batch(points)
    n, d = batch.shape
    steps = h * np.eye(d)
    upper = problem.values((batch[:, None, :] + steps[None]).reshape(n * d, d)).reshape(n, d)
    lower = problem.values((batch[:, None, :] - steps[None]).reshape(n * d, d)).reshape(n, d)
    approx = (upper - lower) / (2.0 * h)
    grads = problem.gradients(batch)
    return float(np.max(np.linalg.norm(approx - grads, axis=1) / (1.0 + np.linalg.norm(grads, axis=1))))


_PROBLEM_FIELDS = {
    "quadratic": {"d": 2, "c": 1.0, "eigenvalues": None, "eta": 1.0},
    "cos_quadratic": {"d": 10, "eta": 1.0},
    "high_cond_quadratic": {"d": 10, "eta": 1.0, "condition": 1e3},
    "non_coercive_demo": {"d": 2, "eta": 0.01, "D_eta": 10.0},
}


def problem_from_dict(spec: dict) -> Problem:
    '''
    Build a problem from its config form, e.g. {"problem": "cos_quadratic", "d": 10}
    '''
    spec = dict(spec)
    name = spec.pop("problem", None)
    if name not in _PROBLEM_FIELDS:
        raise KeyError(f"Unknown problem '{name}'. Valid problems are: {sorted(_PROBLEM_FIELDS)}")
    fields = _PROBLEM_FIELDS[name]
    invalid = set(spec) - set(fields)
    if invalid:
        raise ValueError(
            f"Invalid attributes in problem: {sorted(invalid)}. "
            f"Valid attributes are: {sorted(fields)}")
    args = dict(fields)
    args.update(spec)

    if name == "quadratic":
        if args["eigenvalues"] is not None:
            return QuadraticProblem(np.diag(np.asarray(args["eigenvalues"], dtype=np.float64)), eta=args["eta"])
        return QuadraticProblem.isotropic(int(args["d"]), c=args["c"], eta=args["eta"])
    if name == "cos_quadratic":
        return CosQuadraticProblem(d=int(args["d"]), eta=args["eta"])
    if name == "high_cond_quadratic":
        return HighCondQuadraticProblem(d=int(args["d"]), eta=args["eta"], condition=args["condition"])
    return NonCoerciveDemo(d=int(args["d"]), eta=args["eta"], D_eta=args["D_eta"])
