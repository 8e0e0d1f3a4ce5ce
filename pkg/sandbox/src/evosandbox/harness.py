"""Run one candidate optimizer against one benchmark problem.

The candidate gets a callable objective with the ``bounds.lb`` and
``bounds.ub`` arrays of the task contract.  Every call is recorded as a
best-so-far trace; calls beyond the inner budget raise ``BudgetExhausted``
and are never recorded, even when the candidate swallows the exception.
A SIGALRM-based soft time limit turns runaway candidates into a timeout
response with whatever partial trace was collected; the parent process is
expected to hold a hard kill as backstop.
"""

from __future__ import annotations

import random
import signal
import time
import traceback

import numpy as np

from . import objective_functions as objf


class BudgetExhausted(Exception):
    """The objective was called more often than the budget allows."""


class TimeLimitReached(Exception):
    """Soft wall-clock limit hit while the candidate was running."""


class Bounds:
    def __init__(self, lb: np.ndarray, ub: np.ndarray):
        self.lb = lb
        self.ub = ub


class RecordingObjective:
    """Objective wrapper enforcing the evaluation budget."""

    def __init__(self, value_fn, dim: int, budget: int, lb: float, ub: float):
        self._value_fn = value_fn
        self._dim = dim
        self._budget = budget
        self.bounds = Bounds(np.full(dim, lb), np.full(dim, ub))
        self.trace: list[float] = []
        self.evals_used = 0

    def __call__(self, x) -> float:
        if self.evals_used >= self._budget:
            raise BudgetExhausted(f"budget of {self._budget} evaluations exhausted")
        point = np.asarray(x, dtype=float).reshape(-1)
        if point.shape[0] != self._dim:
            raise ValueError(f"expected {self._dim} coordinates, got {point.shape[0]}")
        value = float(self._value_fn(point))
        self.evals_used += 1
        best = value if not self.trace else min(self.trace[-1], value)
        self.trace.append(best)
        return value


def build_objective(problem: dict):
    """(value_fn, optimum) for a problem object of the wire schema."""
    suite = problem["suite"]
    fid = int(problem["fid"])
    instance = int(problem["instance"])
    dim = int(problem["dim"])
    if suite == "sbox_separable":
        if fid not in (1, 2, 3, 4, 5):
            raise ValueError(f"sbox_separable supports fids 1-5, got {fid}")
        _, f_opt = objf.instance_offsets(suite, fid, instance, dim)

        def value(point: np.ndarray) -> float:
            return objf.single_value(suite, fid, instance, dim, point)

        return value, f_opt
    if suite == "affine_pair":
        fid_b = int(problem["fid_b"])
        alpha = float(problem.get("alpha", 0.0))
        if fid not in (1, 2, 3, 4) or fid_b not in (1, 2, 3, 4):
            raise ValueError("affine_pair components must be fids 1-4")
        probe = np.zeros(dim)
        _, f_opt = objf.affine_pair_value(fid, fid_b, alpha, instance, dim, probe)

        def value(point: np.ndarray) -> float:
            combined, _ = objf.affine_pair_value(fid, fid_b, alpha, instance, dim, point)
            return combined

        return value, f_opt
    raise ValueError(f"unknown suite {suite!r}")


def find_candidate_class(namespace: dict):
    """Last class defined by the candidate module that implements __call__."""
    candidates = [
        value
        for value in namespace.values()
        if isinstance(value, type)
        and getattr(value, "__module__", "") == "candidate"
        and "__call__" in value.__dict__
    ]
    if not candidates:
        raise ValueError("candidate defines no class with a __call__ method")
    return candidates[-1]


def _alarm_handler(signum, frame):
    raise TimeLimitReached()


def _response(status, func, message, wall_time):
    return {
        "status": status,
        "trace": list(func.trace) if func is not None else [],
        "evals_used": func.evals_used if func is not None else 0,
        "error_message": message,
        "wall_time_s": wall_time,
    }


def execute(request: dict) -> dict:
    """Run one sandbox request to completion; never raises."""
    started = time.perf_counter()
    func = None
    try:
        problem = request["problem"]
        budget = int(problem["inner_budget"])
        dim = int(problem["dim"])
        seed = int(request.get("seed", 0))
        time_limit = float(request.get("time_limit_s", 60.0))
        value_fn, _ = build_objective(problem)
        func = RecordingObjective(
            value_fn, dim, budget, float(problem.get("lb", -5.0)), float(problem.get("ub", 5.0))
        )
        np.random.seed(seed % 2**32)
        random.seed(seed)
        namespace = {"__name__": "candidate"}
        exec(compile(request["code"], "<candidate>", "exec"), namespace)
        cls = find_candidate_class(namespace)
    except Exception:
        return _response("error", func, traceback.format_exc(), time.perf_counter() - started)

    previous = signal.signal(signal.SIGALRM, _alarm_handler)
    signal.setitimer(signal.ITIMER_REAL, max(time_limit, 0.05))
    try:
        algorithm = cls(budget, dim)
        algorithm(func)
        status, message = "ok", None
    except BudgetExhausted:
        status, message = "ok", None
    except TimeLimitReached:
        status, message = "timeout", f"candidate exceeded the {time_limit:.1f}s time limit"
    except BaseException:
        status, message = "error", traceback.format_exc()
    finally:
        signal.setitimer(signal.ITIMER_REAL, 0.0)
        signal.signal(signal.SIGALRM, previous)

    if status == "ok" and not func.trace:
        status, message = "error", "candidate finished without evaluating the objective"
    return _response(status, func, message, time.perf_counter() - started)
