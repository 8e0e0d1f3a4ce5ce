"""The elitist (mu+lambda) evolution loop around an LLM code generator.

Every LLM query produces exactly one archived candidate, successful or
not: parse failures and runtime failures take a fitness-0 penalty instead
of aborting the generation.  Once the archive is large enough, a surrogate
is refit from scratch at the top of each generation and every offspring
prompt is extended with a single feature guidance sentence derived from
its parent's attribution.
"""

from __future__ import annotations

import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Optional

from . import surrogate
from .attribution import Guidance, render_guidance, select_guidance, shap_values
from .features import FEATURE_NAMES, FeatureVector, ParseError, extract_features
from .llm import (
    MUTATION_PROMPTS,
    TASK_PROMPT,
    LLMUsage,
    MalformedResponse,
    PromptBundle,
    TransportError,
)


class LLMUnavailable(Exception):
    """Provider failed permanently; the run aborts with a partial archive."""


class EvaluatorUnavailable(Exception):
    """Evaluator backend failed permanently (not a per-candidate error)."""


class EvaluationFailure(Exception):
    """One candidate failed at evaluation time; takes the penalty path."""


PENALTY_FITNESS = 0.0


@dataclass(frozen=True)
class Candidate:
    id: str
    archive_index: int
    generation: int
    prompt_kind: str  # init | random_new | refine
    fitness: float
    code: Optional[str] = None
    description: Optional[str] = None
    features: Optional[FeatureVector] = None
    parent_id: Optional[str] = None
    guidance: Optional[Guidance] = None
    attribution_phi0: Optional[float] = None
    attribution_phi: Optional[tuple[float, ...]] = None
    error: Optional[str] = None
    usage: LLMUsage = LLMUsage()
    created_at: str = ""


class Archive:
    """Append-only candidate store, ordered by evaluation."""

    def __init__(self):
        self._records: list[Candidate] = []
        self._by_id: dict[str, Candidate] = {}

    def add(self, candidate: Candidate) -> None:
        if candidate.id in self._by_id:
            raise ValueError(f"duplicate candidate id {candidate.id}")
        self._records.append(candidate)
        self._by_id[candidate.id] = candidate

    def get(self, candidate_id: str) -> Candidate:
        return self._by_id[candidate_id]

    def best(self) -> Candidate:
        return max(self._records, key=lambda c: (c.fitness, -c.archive_index))

    def training_pairs(self) -> tuple[list[FeatureVector], list[float]]:
        """(features, fitness) over candidates with a parseable program;
        runtime failures stay in at their penalty fitness."""
        rows = [c for c in self._records if c.features is not None]
        return [c.features for c in rows], [c.fitness for c in rows]

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self):
        return iter(self._records)

    def __getitem__(self, index: int) -> Candidate:
        return self._records[index]


@dataclass
class RunConfig:
    mu: int = 8
    lambda_: int = 8
    budget: int = 200
    elitism: bool = True
    guidance_enabled: bool = True
    min_archive: Optional[int] = None  # defaults to mu
    surrogate_params: surrogate.GbtParams = field(default_factory=surrogate.GbtParams)
    seed: int = 0
    task_prompt: str = TASK_PROMPT
    mutation_prompts: dict[str, str] = field(default_factory=lambda: dict(MUTATION_PROMPTS))
    max_inflight: int = 1

    def __post_init__(self):
        if self.mu < 1 or self.lambda_ < 1:
            raise ValueError("mu and lambda must be at least 1")
        if self.budget < self.mu:
            raise ValueError("budget must cover the initial population")
        if self.min_archive is None:
            self.min_archive = self.mu
        if self.min_archive < 2:
            raise ValueError("min_archive must be at least 2")
        if not self.mutation_prompts:
            raise ValueError("need at least one mutation prompt")


@dataclass
class GenerationStats:
    generation: int
    population_best: float
    archive_size: int
    surrogate_trained: bool


@dataclass
class RunResult:
    archive: Archive
    best_id: str
    generations: list[GenerationStats]
    seed: int
    wall_time_s: float
    prompt_tokens: int
    completion_tokens: int

    @property
    def best(self) -> Candidate:
        return self.archive.get(self.best_id)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class EvolutionEngine:
    """One evolutionary run; create a fresh engine per run."""

    def __init__(self, config: RunConfig, provider, evaluator):
        self.config = config
        self.provider = provider
        self.evaluator = evaluator
        self.rng = random.Random(config.seed)
        self.archive = Archive()
        self.population: list[Candidate] = []
        self.generation = 0
        self.stats: list[GenerationStats] = []
        self.model: Optional[surrogate.SurrogateModel] = None

    # -- candidate production -------------------------------------------------

    def _spawn(
        self,
        bundle: PromptBundle,
        parent: Optional[Candidate],
        prompt_kind: str,
        guidance: Optional[Guidance],
        attribution,
    ) -> Candidate:
        # id and archive_index are placeholders here; _archive assigns the
        # real ones under the single-writer append.
        base = dict(
            id="",
            archive_index=-1,
            generation=self.generation,
            prompt_kind=prompt_kind,
            parent_id=parent.id if parent else None,
            guidance=guidance,
            attribution_phi0=attribution.phi0 if attribution else None,
            attribution_phi=attribution.phi if attribution else None,
            created_at=_now(),
        )
        try:
            reply = self.provider.generate(bundle)
        except TransportError as exc:
            raise LLMUnavailable(str(exc)) from exc
        except MalformedResponse as exc:
            return Candidate(fitness=PENALTY_FITNESS, error=f"malformed reply: {exc}", **base)

        base["usage"] = reply.usage
        base["description"] = reply.description
        try:
            features = extract_features(reply.code)
        except ParseError as exc:
            return Candidate(
                fitness=PENALTY_FITNESS, code=reply.code, error=f"parse error: {exc}", **base
            )
        try:
            fitness, note = self.evaluator.evaluate(reply.code)
        except EvaluationFailure as exc:
            return Candidate(
                fitness=PENALTY_FITNESS,
                code=reply.code,
                features=features,
                error=str(exc),
                **base,
            )
        return Candidate(
            fitness=fitness, code=reply.code, features=features, error=note, **base
        )

    def _archive(self, candidate: Candidate) -> Candidate:
        index = len(self.archive)
        candidate = replace(candidate, id=f"c{index:04d}", archive_index=index)
        self.archive.add(candidate)
        return candidate

    # -- algorithm steps ------------------------------------------------------

    def initialize_population(self) -> None:
        """Generation 0: mu candidates from the task prompt alone."""
        bundle = PromptBundle(task_prompt=self.config.task_prompt)
        for _ in range(self.config.mu):
            if len(self.archive) >= self.config.budget:
                break
            candidate = self._archive(self._spawn(bundle, None, "init", None, None))
            self.population.append(candidate)
        self._record_generation()

    def _maybe_fit_surrogate(self) -> None:
        self.model = None
        if not self.config.guidance_enabled:
            return
        features, targets = self.archive.training_pairs()
        if len(features) < self.config.min_archive:
            return
        self.model = surrogate.fit(
            features, targets, self.config.surrogate_params, feature_names=FEATURE_NAMES
        )

    def _offspring_plan(self, parent: Candidate) -> tuple[PromptBundle, str, Optional[Guidance], object]:
        kind = self.rng.choice(sorted(self.config.mutation_prompts))
        guidance = None
        attribution = None
        if self.model is not None and parent.features is not None:
            attribution = shap_values(self.model, parent.features)
            guidance = select_guidance(attribution, FEATURE_NAMES)
        bundle = PromptBundle(
            task_prompt=self.config.task_prompt,
            parent_code=parent.code,
            parent_description=parent.description,
            parent_error=parent.error,
            mutation_instruction=self.config.mutation_prompts[kind],
            guidance_sentence=render_guidance(guidance) if guidance else None,
        )
        return bundle, kind, guidance, attribution

    def step_generation(self) -> GenerationStats:
        """One pass of: fit surrogate, spawn lambda offspring, select survivors."""
        self.generation += 1
        self._maybe_fit_surrogate()
        remaining = self.config.budget - len(self.archive)
        count = min(self.config.lambda_, remaining)
        plans = []
        for _ in range(count):
            parent = self.rng.choice(self.population)
            plans.append((parent, *self._offspring_plan(parent)))

        if self.config.max_inflight > 1:
            with ThreadPoolExecutor(max_workers=self.config.max_inflight) as pool:
                futures = [
                    pool.submit(self._spawn, bundle, parent, kind, guidance, attribution)
                    for parent, bundle, kind, guidance, attribution in plans
                ]
                offspring = [self._archive(f.result()) for f in futures]
        else:
            offspring = [
                self._archive(self._spawn(bundle, parent, kind, guidance, attribution))
                for parent, bundle, kind, guidance, attribution in plans
            ]

        pool_candidates = self.population + offspring if self.config.elitism else offspring
        if not pool_candidates:
            pool_candidates = self.population
        survivors = sorted(pool_candidates, key=lambda c: (-c.fitness, c.archive_index))
        self.population = survivors[: self.config.mu]
        return self._record_generation()

    def _record_generation(self) -> GenerationStats:
        stats = GenerationStats(
            generation=self.generation,
            population_best=max(c.fitness for c in self.population),
            archive_size=len(self.archive),
            surrogate_trained=self.model is not None,
        )
        self.stats.append(stats)
        return stats

    def run(self) -> RunResult:
        started = time.perf_counter()
        self.initialize_population()
        while len(self.archive) < self.config.budget:
            self.step_generation()
        best = self.archive.best()
        return RunResult(
            archive=self.archive,
            best_id=best.id,
            generations=self.stats,
            seed=self.config.seed,
            wall_time_s=time.perf_counter() - started,
            prompt_tokens=sum(c.usage.prompt_tokens for c in self.archive),
            completion_tokens=sum(c.usage.completion_tokens for c in self.archive),
        )
