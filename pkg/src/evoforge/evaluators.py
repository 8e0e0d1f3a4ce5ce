"""Fitness evaluators the engine can plug in.

Both return ``(fitness, note)``: the note is a non-fatal flag (for example
a scored-but-timed-out problem) that lands in the candidate's error field
without forcing the penalty path.
"""

from __future__ import annotations

from typing import Optional, Sequence

from .benchmarks import (
    AoccParams,
    ProblemSpec,
    aggregate_fitness,
    aocc,
    make_problem,
    synthetic_evaluate,
)
from .engine import EvaluationFailure
from .sandbox_client import run_sandboxed


class SyntheticEvaluator:
    """Execution-free fitness from the candidate's own structure."""

    def __init__(self, weights=None, scales=None):
        self.weights = weights
        self.scales = scales

    def evaluate(self, code: str) -> tuple[float, Optional[str]]:
        return synthetic_evaluate(code, weights=self.weights, scales=self.scales), None


class BenchmarkEvaluator:
    """Mean AOCC over a problem set, each run in a sandbox process."""

    def __init__(
        self,
        problems: Sequence[ProblemSpec],
        aocc_params: AoccParams = AoccParams(),
        time_limit_s: float = 60.0,
        sandbox_cmd: Optional[Sequence[str]] = None,
    ):
        if not problems:
            raise ValueError("need at least one problem")
        self.problems = list(problems)
        self.aocc_params = aocc_params
        self.time_limit_s = time_limit_s
        self.sandbox_cmd = sandbox_cmd

    def evaluate(self, code: str) -> tuple[float, Optional[str]]:
        scores = []
        notes = []
        for spec in self.problems:
            optimum = make_problem(spec).optimum
            response = run_sandboxed(
                code,
                spec.to_wire(),
                time_limit_s=self.time_limit_s,
                seed=spec.fid * 1000 + spec.instance,
                cmd=self.sandbox_cmd,
            )
            status = response.get("status")
            trace = response.get("trace") or []
            if status == "ok":
                scores.append(aocc(trace, spec.inner_budget, self.aocc_params, optimum))
            elif status == "timeout" and trace:
                # partial trace is still informative: score it padded, flag it
                scores.append(aocc(trace, spec.inner_budget, self.aocc_params, optimum))
                notes.append(
                    f"timeout on fid {spec.fid} instance {spec.instance}: scored partial trace"
                )
            elif status == "timeout":
                raise EvaluationFailure(
                    f"timeout with no evaluations on fid {spec.fid} instance {spec.instance}"
                )
            else:
                raise EvaluationFailure(
                    response.get("error_message") or f"sandbox error on fid {spec.fid}"
                )
        return aggregate_fitness(scores), "; ".join(notes) or None
