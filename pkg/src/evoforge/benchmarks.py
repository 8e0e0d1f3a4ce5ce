"""Problem construction, anytime scoring, and the execution-free evaluator.

Fitness everywhere in the framework is the area over the convergence curve
(AOCC) of log-scaled best-so-far regret, clipped to a configurable window
and averaged over the evaluation budget: 1.0 means at-the-floor from the
first evaluation, 0.0 means never better than the ceiling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from . import objective_functions as objf
from .features import extract_features


class EmptyTrace(Exception):
    """A candidate produced no recorded evaluations."""


class UnknownFid(Exception):
    """Function id outside the supported inventory."""


@dataclass(frozen=True)
class AoccParams:
    """Log-regret window of the anytime metric."""

    lb: float = -8.0
    ub: float = 2.0

    def __post_init__(self):
        if not self.lb < self.ub:
            raise ValueError("lb must be below ub")


@dataclass(frozen=True)
class ProblemSpec:
    suite: str  # sbox_separable | affine_pair
    fid: int
    instance: int
    dim: int
    inner_budget: int
    lb: float = objf.LOWER_BOUND
    ub: float = objf.UPPER_BOUND
    fid_b: Optional[int] = None  # affine_pair only
    alpha: float = 0.0  # affine_pair only

    def to_wire(self) -> dict:
        """Problem object of the sandbox protocol (field names are pinned)."""
        wire = {
            "suite": self.suite,
            "fid": self.fid,
            "instance": self.instance,
            "dim": self.dim,
            "inner_budget": self.inner_budget,
            "lb": self.lb,
            "ub": self.ub,
        }
        if self.suite == "affine_pair":
            wire["fid_b"] = self.fid_b
            wire["alpha"] = self.alpha
        return wire


class Trace:
    """Best-so-far objective values, one per recorded evaluation."""

    def __init__(self, values: Optional[Iterable[float]] = None):
        self._best: list[float] = []
        if values is not None:
            for value in values:
                self.append(value)

    def append(self, raw_value: float) -> None:
        best = raw_value if not self._best else min(self._best[-1], raw_value)
        self._best.append(best)

    @property
    def values(self) -> list[float]:
        return list(self._best)

    def __len__(self) -> int:
        return len(self._best)

    def __iter__(self):
        return iter(self._best)


def aocc(
    trace,
    budget: int,
    params: AoccParams = AoccParams(),
    optimum: float = 0.0,
) -> float:
    """Area over the convergence curve in [0, 1]; higher is better.

    Regret is floored at 1e-12 before the log10, traces shorter than
    ``budget`` are padded with their final value, and longer ones are cut
    at ``budget``.
    """
    values = list(trace)
    if not values:
        raise EmptyTrace("cannot score an empty trace")
    if len(values) < budget:
        values = values + [values[-1]] * (budget - len(values))
    values = values[:budget]
    span = params.ub - params.lb
    total = 0.0
    for value in values:
        y = math.log10(max(value - optimum, objf.REGRET_FLOOR))
        y = min(max(y, params.lb), params.ub)
        total += 1.0 - (y - params.lb) / span
    return total / budget


@dataclass(frozen=True)
class Bounds:
    lb: np.ndarray
    ub: np.ndarray


class Problem:
    """Callable objective with the bounds attribute candidates rely on."""

    def __init__(self, spec: ProblemSpec, value_fn, optimum: float):
        self.spec = spec
        self._value_fn = value_fn
        self.optimum = optimum
        self.bounds = Bounds(
            lb=np.full(spec.dim, spec.lb), ub=np.full(spec.dim, spec.ub)
        )

    def __call__(self, x) -> float:
        point = np.asarray(x, dtype=float).reshape(-1)
        if point.shape[0] != self.spec.dim:
            raise ValueError(f"expected {self.spec.dim} coordinates, got {point.shape[0]}")
        return self._value_fn(point)


def make_problem(spec: ProblemSpec) -> Problem:
    """Instantiate the objective for one (suite, fid, instance, dim)."""
    if spec.suite == "sbox_separable":
        if spec.fid not in (1, 2, 3, 4, 5):
            raise UnknownFid(f"sbox_separable supports fids 1-5, got {spec.fid}")
        _, f_opt = objf.instance_offsets(spec.suite, spec.fid, spec.instance, spec.dim)

        def value(point: np.ndarray) -> float:
            return objf.single_value(spec.suite, spec.fid, spec.instance, spec.dim, point)

        return Problem(spec, value, f_opt)

    if spec.suite == "affine_pair":
        if spec.fid not in (1, 2, 3, 4) or spec.fid_b not in (1, 2, 3, 4):
            raise UnknownFid("affine_pair components must be fids 1-4")
        if not 0.0 <= spec.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        probe = np.zeros(spec.dim)
        _, f_opt = objf.affine_pair_value(
            spec.fid, spec.fid_b, spec.alpha, spec.instance, spec.dim, probe
        )

        def value(point: np.ndarray) -> float:
            combined, _ = objf.affine_pair_value(
                spec.fid, spec.fid_b, spec.alpha, spec.instance, spec.dim, point
            )
            return combined

        return Problem(spec, value, f_opt)

    raise UnknownFid(f"unknown suite {spec.suite!r}")


def aggregate_fitness(per_problem: Sequence[float]) -> float:
    """Unweighted mean AOCC over the training problems."""
    if not per_problem:
        raise ValueError("need at least one per-problem value")
    return float(sum(per_problem) / len(per_problem))


# ---------------------------------------------------------------------------
# Execution-free synthetic evaluator
# ---------------------------------------------------------------------------

#: Min-max scales used to normalise each feature into [0, 1] before scoring.
DEFAULT_FEATURE_SCALES: dict[str, tuple[float, float]] = {
    "node_count": (0.0, 2000.0),
    "edge_count": (0.0, 2000.0),
    "degree_mean": (0.0, 4.0),
    "degree_variance": (0.0, 50.0),
    "degree_entropy": (0.0, 6.0),
    "max_degree": (0.0, 60.0),
    "depth_min": (0.0, 10.0),
    "depth_mean": (0.0, 15.0),
    "depth_max": (0.0, 25.0),
    "avg_clustering": (0.0, 1.0),
    "degree_assortativity": (-1.0, 1.0),
    "diameter": (0.0, 40.0),
    "avg_shortest_path": (0.0, 20.0),
    "function_count": (0.0, 20.0),
    "total_cyclomatic_complexity": (0.0, 60.0),
    "mean_cyclomatic_complexity": (0.0, 12.0),
    "max_cyclomatic_complexity": (0.0, 25.0),
    "total_token_count": (0.0, 3000.0),
    "mean_token_count": (0.0, 400.0),
    "total_parameter_count": (0.0, 60.0),
    "mean_parameter_count": (0.0, 10.0),
    "max_parameter_count": (0.0, 15.0),
}

#: Default reward: richer parameterisation and control flow score higher.
DEFAULT_SYNTHETIC_WEIGHTS: dict[str, float] = {
    "total_parameter_count": 6.0,
    "total_cyclomatic_complexity": 2.0,
}


def synthetic_evaluate(
    code: str,
    weights: Optional[dict[str, float]] = None,
    scales: Optional[dict[str, tuple[float, float]]] = None,
) -> float:
    """Deterministic stand-in fitness with no code execution.

    The candidate's feature vector is min-max normalised and passed through
    a logistic over a configurable linear reward, so fitness always lands
    strictly inside (0, 1). Raises ParseError for invalid code (handled by
    the penalty path upstream).
    """
    weights = DEFAULT_SYNTHETIC_WEIGHTS if weights is None else weights
    scales = DEFAULT_FEATURE_SCALES if scales is None else {**DEFAULT_FEATURE_SCALES, **scales}
    vector = extract_features(code)
    score = 0.0
    for name, weight in weights.items():
        lo, hi = scales[name]
        z = (vector.get(name) - lo) / (hi - lo)
        score += weight * min(max(z, 0.0), 1.0)
    return 1.0 / (1.0 + math.exp(-score))
