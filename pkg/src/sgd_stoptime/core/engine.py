# Copyright 2025 The sgd_stoptime Authors

import hashlib
import json
import math
from pathlib import Path

import numpy as np
import pandas as pd

import sgd_stoptime.logger as sglog
from sgd_stoptime.constants import DEFAULT_MEMORY_BUDGET, TRAJECTORY_CSV_COLUMNS
from sgd_stoptime.model.oracle import GradientOracle, make_stream
from sgd_stoptime.model.problem import Problem
from sgd_stoptime.model.schedule import StepSizeSchedule
from sgd_stoptime.types import Vector


class FingerprintMismatch(ValueError):
    pass


class DivergedTrajectoryError(RuntimeError):
    pass


class MissingRecordsError(ValueError):
    pass


def canonical_hash(data) -> str:
    return hashlib.sha256(json.dumps(data, sort_keys=True, separators=(",", ":")).encode("utf-8")).hexdigest()


def setup_fingerprint(problem: Problem, oracle: GradientOracle, schedule: StepSizeSchedule, theta1) -> str:
    return canonical_hash({
        "problem": problem.describe(),
        "oracle": oracle.describe(),
        "schedule": schedule.describe(),
        "theta1": [float(v) for v in np.asarray(theta1, dtype=np.float64)],
    })


def run_fingerprint(setup: str, T: int) -> str:
    return canonical_hash({"setup": setup, "T": int(T)})


class RecordPolicy:
    '''
    Which vector records to keep. Vectors are only retained while d * (T + 1) fits the memory budget.
    '''
    def __init__(self, keep_iterates: bool = False, keep_noise: bool = False,
                 memory_budget: int = DEFAULT_MEMORY_BUDGET) -> None:
        self.keep_iterates = keep_iterates
        self.keep_noise = keep_noise
        self.memory_budget = int(memory_budget)

    def fits(self, d: int, T: int) -> bool:
        return d * (T + 1) <= self.memory_budget

    def to_dict(self) -> dict:
        return {"keep_iterates": self.keep_iterates, "keep_noise": self.keep_noise,
                "memory_budget": self.memory_budget}


class Trajectory:
    '''
    Seeded record of one SGD run. Record k (0-based) belongs to t = k + 1 and holds the
    statistics at theta_t before the update:

        eps        step size eps_t
        f          f(theta_t)
        grad_norm  ||grad f(theta_t)||
        mart_inc   eps_t grad f(theta_t)^T (grad f(theta_t) - g_t)
        g_norm_sq  ||g_t||^2

    Optional vector records: iterates (theta_t) and noise (grad f(theta_t) - g_t).
    '''
    def __init__(self,
                 eps: np.ndarray,
                 f: np.ndarray,
                 grad_norm: np.ndarray,
                 mart_inc: np.ndarray,
                 g_norm_sq: np.ndarray,
                 f_star: float = 0.0,
                 seed: int = 0,
                 stream_index: int = 0,
                 T: int | None = None,
                 theta1: Vector | None = None,
                 setup_fingerprint: str = "manual",
                 final_point: Vector | None = None,
                 final_f: float = math.nan,
                 final_grad_norm: float = math.nan,
                 iterates: np.ndarray | None = None,
                 noise: np.ndarray | None = None,
                 rng_state: dict | None = None,
                 diverged: bool = False,
                 last_finite_step: int | None = None) -> None:
        self.eps = np.asarray(eps, dtype=np.float64)
        n = len(self.eps)
        self.t = np.arange(1, n + 1, dtype=np.int64)
        self.f = np.asarray(f, dtype=np.float64)
        self.grad_norm = np.asarray(grad_norm, dtype=np.float64)
        self.mart_inc = np.asarray(mart_inc, dtype=np.float64)
        self.g_norm_sq = np.asarray(g_norm_sq, dtype=np.float64)
        for name in ("f", "grad_norm", "mart_inc", "g_norm_sq"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"Trajectory column {name} has {len(getattr(self, name))} entries, expected {n}")
        self.f_star = float(f_star)
        self.seed = int(seed)
        self.stream_index = int(stream_index)
        self.T = n if T is None else int(T)
        self.theta1 = None if theta1 is None else np.asarray(theta1, dtype=np.float64)
        self.setup_fingerprint = setup_fingerprint
        self.fingerprint = run_fingerprint(setup_fingerprint, self.T)
        self.final_point = final_point
        self.final_f = float(final_f)
        self.final_grad_norm = float(final_grad_norm)
        self.iterates = iterates
        self.noise = noise
        self.rng_state = rng_state
        self.diverged = diverged
        self.last_finite_step = n if last_finite_step is None else int(last_finite_step)

    @classmethod
    def from_arrays(cls, eps, f, grad_norm, mart_inc=None, g_norm_sq=None, final_f: float = math.nan,
                    **kwargs) -> "Trajectory":
        '''
        hand-built trajectory from scalar columns; missing martingale columns are zero-noise values
        '''
        grad_norm = np.asarray(grad_norm, dtype=np.float64)
        return cls(eps=eps, f=f, grad_norm=grad_norm,
                   mart_inc=np.zeros(len(grad_norm)) if mart_inc is None else mart_inc,
                   g_norm_sq=grad_norm**2 if g_norm_sq is None else g_norm_sq,
                   final_f=final_f, **kwargs)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def n_steps(self) -> int:
        return len(self.t)

    @property
    def f_gap(self) -> np.ndarray:
        return self.f - self.f_star

    def f_path(self) -> np.ndarray:
        '''
        f(theta_1..theta_{n+1}); the final value is missing when it is not finite
        '''
        if math.isfinite(self.final_f):
            return np.append(self.f, self.final_f)
        return self.f

    def require_vectors(self, which: str) -> np.ndarray:
        data = getattr(self, which)
        if data is None:
            flag = "keep_iterates" if which == "iterates" else "keep_noise"
            raise MissingRecordsError(
                f"Trajectory seed {self.seed} has no {which} records. "
                f"Enable record_policy.{flag} and raise memory_budget above d*(T+1)")
        return data

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "t": self.t,
            "eps": self.eps,
            "f": self.f,
            "grad_norm": self.grad_norm,
            "mart_inc": self.mart_inc,
            "g_norm_sq": self.g_norm_sq,
        }, columns=TRAJECTORY_CSV_COLUMNS)

    def _meta(self) -> dict:
        return {
            "seed": self.seed,
            "stream_index": self.stream_index,
            "T": self.T,
            "f_star": self.f_star,
            "setup_fingerprint": self.setup_fingerprint,
            "fingerprint": self.fingerprint,
            "final_f": self.final_f,
            "final_grad_norm": self.final_grad_norm,
            "rng_state": self.rng_state,
            "diverged": self.diverged,
            "last_finite_step": self.last_finite_step,
        }

    def save_state(self, path) -> Path:
        '''
        write a replay record: scalar columns, vectors and JSON metadata in one .npz file
        '''
        path = Path(path)
        arrays = {name: getattr(self, name) for name in TRAJECTORY_CSV_COLUMNS if name != "t"}
        for name in ("theta1", "final_point", "iterates", "noise"):
            if getattr(self, name) is not None:
                arrays[name] = getattr(self, name)
        arrays["meta"] = np.array(json.dumps(self._meta(), sort_keys=True))
        with open(path, "wb") as fh:
            np.savez(fh, **arrays)
        sglog.log(sglog.DEBUG, f"Saved trajectory seed {self.seed} ({self.n_steps} steps) to {path}")
        return path

    @classmethod
    def load_state(cls, path) -> "Trajectory":
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            optional = {name: (data[name] if name in data.files else None)
                        for name in ("theta1", "final_point", "iterates", "noise")}
            traj = cls(eps=data["eps"], f=data["f"], grad_norm=data["grad_norm"],
                       mart_inc=data["mart_inc"], g_norm_sq=data["g_norm_sq"],
                       f_star=meta["f_star"], seed=meta["seed"], stream_index=meta["stream_index"],
                       T=meta["T"], setup_fingerprint=meta["setup_fingerprint"],
                       final_f=meta["final_f"], final_grad_norm=meta["final_grad_norm"],
                       rng_state=meta["rng_state"], diverged=meta["diverged"],
                       last_finite_step=meta["last_finite_step"], **optional)
        if traj.fingerprint != meta["fingerprint"]:
            raise FingerprintMismatch(f"Replay record {path} is corrupt: stored fingerprint does not match its setup")
        return traj


class SGDEngine:
    # drives the plain SGD recursion for one setup:
    #   * evaluate f and grad f at theta_t, draw g_t from the oracle
    #   * record the per-step statistics before the update
    #   * theta_{t+1} = theta_t - eps_t g_t
    #   * stop early on the first non-finite value

    def __init__(self,
                 problem: Problem,
                 oracle: GradientOracle,
                 schedule: StepSizeSchedule,
                 record_policy: RecordPolicy | None = None) -> None:
        self.problem = problem
        self.oracle = oracle
        self.schedule = schedule
        self.record_policy = record_policy or RecordPolicy()

    def _vector_flags(self, T_total: int, seed: int) -> tuple[bool, bool]:
        policy = self.record_policy
        wanted = policy.keep_iterates or policy.keep_noise
        if wanted and not policy.fits(self.problem.dimension, T_total):
            sglog.log(sglog.WARN, f"seed {seed}: d*(T+1)={self.problem.dimension * (T_total + 1)} exceeds the "
                                  f"memory budget {policy.memory_budget}, vector records dropped")
            return False, False
        return policy.keep_iterates, policy.keep_noise

    def _steps(self, theta: Vector, rng: np.random.Generator, t_start: int, t_end: int,
               keep_iterates: bool, keep_noise: bool) -> dict:
        n = t_end - t_start + 1
        d = self.problem.dimension
        eps = self.schedule.step_sizes(t_start, t_end)
        out = {
            "f": np.empty(n), "grad_norm": np.empty(n), "mart_inc": np.empty(n), "g_norm_sq": np.empty(n),
            "iterates": np.empty((n, d)) if keep_iterates else None,
            "noise": np.empty((n, d)) if keep_noise else None,
        }
        done = 0
        diverged = False
        tracing = sglog.loglevel >= sglog.TRACE
        with np.errstate(over="ignore", invalid="ignore"):
            for k in range(n):
                f_val, grad = self.problem.evaluate(theta)
                g = self.oracle.sample(self.problem, theta, rng, grad=grad)
                noise = grad - g
                grad_sq = float(grad @ grad)
                mart = eps[k] * float(grad @ noise)
                g_sq = float(g @ g)
                if not (math.isfinite(f_val) and math.isfinite(grad_sq) and math.isfinite(mart) and math.isfinite(g_sq)):
                    diverged = True
                    break
                out["f"][k] = f_val
                out["grad_norm"][k] = math.sqrt(grad_sq)
                out["mart_inc"][k] = mart
                out["g_norm_sq"][k] = g_sq
                if keep_iterates:
                    out["iterates"][k] = theta
                if keep_noise:
                    out["noise"][k] = noise
                theta = theta - eps[k] * g
                done += 1
                if tracing:
                    sglog.log(sglog.TRACE, f"t={t_start + k} f={f_val:.6g} |grad|={out['grad_norm'][k]:.6g}")

            final_f, final_grad = self.problem.evaluate(theta) if not diverged else (math.nan, None)
            if not diverged and not (math.isfinite(final_f) and np.all(np.isfinite(final_grad))):
                diverged = True

        for key in ("f", "grad_norm", "mart_inc", "g_norm_sq", "iterates", "noise"):
            if out[key] is not None:
                out[key] = out[key][:done]
        out["eps"] = eps[:done]
        out["diverged"] = diverged
        out["last_finite_step"] = t_start - 1 + done
        if diverged:
            out["final_point"], out["final_f"], out["final_grad_norm"] = None, math.nan, math.nan
        else:
            out["final_point"] = theta
            out["final_f"] = final_f
            out["final_grad_norm"] = float(np.linalg.norm(final_grad))
        return out

    def run(self, theta1, T: int, seed: int, stream_index: int = 0) -> Trajectory:
        if T < 1:
            raise ValueError(f"T must be >= 1, got {T}")
        theta = self.problem._as_point(theta1).copy()
        rng = make_stream(seed, stream_index)
        keep_iterates, keep_noise = self._vector_flags(T, seed)

        steps = self._steps(theta, rng, 1, T, keep_iterates, keep_noise)
        if steps["diverged"]:
            sglog.log(sglog.WARN, f"seed {seed}: trajectory diverged after step {steps['last_finite_step']}")
        return Trajectory(eps=steps["eps"], f=steps["f"], grad_norm=steps["grad_norm"],
                          mart_inc=steps["mart_inc"], g_norm_sq=steps["g_norm_sq"],
                          f_star=self.problem.f_star, seed=seed, stream_index=stream_index, T=T,
                          theta1=theta,
                          setup_fingerprint=setup_fingerprint(self.problem, self.oracle, self.schedule, theta),
                          final_point=steps["final_point"], final_f=steps["final_f"],
                          final_grad_norm=steps["final_grad_norm"],
                          iterates=steps["iterates"], noise=steps["noise"],
                          rng_state=rng.bit_generator.state,
                          diverged=steps["diverged"], last_finite_step=steps["last_finite_step"])

    def resume(self, trajectory: Trajectory, additional_T: int) -> Trajectory:
        '''
        continue a finished run; the result equals a single run of length T + additional_T
        '''
        if trajectory.diverged:
            raise DivergedTrajectoryError(f"Cannot resume seed {trajectory.seed}: "
                                          f"diverged after step {trajectory.last_finite_step}")
        if additional_T < 1:
            raise ValueError(f"additional_T must be >= 1, got {additional_T}")
        if trajectory.theta1 is None or trajectory.final_point is None or trajectory.rng_state is None:
            raise MissingRecordsError(f"Trajectory seed {trajectory.seed} lacks the replay state needed to resume")
        expected = setup_fingerprint(self.problem, self.oracle, self.schedule, trajectory.theta1)
        if expected != trajectory.setup_fingerprint:
            raise FingerprintMismatch(f"Setup fingerprint {expected[:12]} does not match "
                                      f"trajectory {trajectory.setup_fingerprint[:12]} of seed {trajectory.seed}")

        T_total = trajectory.T + additional_T
        rng = np.random.Generator(np.random.PCG64())
        rng.bit_generator.state = trajectory.rng_state
        keep_iterates, keep_noise = self._vector_flags(T_total, trajectory.seed)
        keep_iterates &= trajectory.iterates is not None
        keep_noise &= trajectory.noise is not None

        steps = self._steps(np.array(trajectory.final_point, dtype=np.float64), rng,
                            trajectory.T + 1, T_total, keep_iterates, keep_noise)

        def _join(name):
            return np.concatenate([getattr(trajectory, name), steps[name]])

        return Trajectory(eps=_join("eps"), f=_join("f"), grad_norm=_join("grad_norm"),
                          mart_inc=_join("mart_inc"), g_norm_sq=_join("g_norm_sq"),
                          f_star=trajectory.f_star, seed=trajectory.seed, stream_index=trajectory.stream_index,
                          T=T_total, theta1=trajectory.theta1, setup_fingerprint=trajectory.setup_fingerprint,
                          final_point=steps["final_point"], final_f=steps["final_f"],
                          final_grad_norm=steps["final_grad_norm"],
                          iterates=_join("iterates") if keep_iterates else None,
                          noise=_join("noise") if keep_noise else None,
                          rng_state=rng.bit_generator.state,
                          diverged=steps["diverged"], last_finite_step=steps["last_finite_step"])


def run(problem: Problem, oracle: GradientOracle, schedule: StepSizeSchedule, theta1, T: int, seed: int,
        record_policy: RecordPolicy | None = None) -> Trajectory:
    return SGDEngine(problem, oracle, schedule, record_policy).run(theta1, T, seed)


def resume(trajectory: Trajectory, additional_T: int, problem: Problem, oracle: GradientOracle,
           schedule: StepSizeSchedule, record_policy: RecordPolicy | None = None) -> Trajectory:
    return SGDEngine(problem, oracle, schedule, record_policy).resume(trajectory, additional_T)
