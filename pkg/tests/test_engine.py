import pytest

from evoforge.archive_io import archive_hash, record_from_candidate
from evoforge.engine import (
    EvaluationFailure,
    EvolutionEngine,
    LLMUnavailable,
    RunConfig,
)
from evoforge.evaluators import SyntheticEvaluator
from evoforge.llm import MockProvider, TransportError
from evoforge.surrogate import GbtParams


def small_config(**overrides):
    defaults = dict(
        mu=4,
        lambda_=6,
        budget=40,
        seed=7,
        guidance_enabled=True,
        surrogate_params=GbtParams(n_trees=10, max_depth=2),
    )
    defaults.update(overrides)
    return RunConfig(**defaults)


def make_engine(**overrides):
    cfg = small_config(**overrides)
    return EvolutionEngine(cfg, MockProvider(seed=cfg.seed), SyntheticEvaluator())


class RecordingProvider(MockProvider):
    def __init__(self, seed=0):
        super().__init__(seed=seed)
        self.bundles = []

    def generate(self, bundle):
        self.bundles.append(bundle)
        return super().generate(bundle)


class FlakyEvaluator(SyntheticEvaluator):
    """Fails every third candidate at evaluation time."""

    def __init__(self):
        super().__init__()
        self.calls = 0

    def evaluate(self, code):
        self.calls += 1
        if self.calls % 3 == 0:
            raise EvaluationFailure("RuntimeError: synthetic failure")
        return super().evaluate(code)


class DeadProvider:
    def generate(self, bundle):
        raise TransportError("connection refused")


class TestInitializePopulation:
    def test_archive_holds_mu_generation_zero_candidates(self):
        engine = make_engine()
        engine.initialize_population()
        assert len(engine.archive) == 4
        assert all(c.generation == 0 for c in engine.archive)
        assert all(c.parent_id is None for c in engine.archive)
        assert all(c.prompt_kind == "init" for c in engine.archive)
        assert all(c.guidance is None for c in engine.archive)

    def test_runtime_failure_archived_with_penalty(self):
        cfg = small_config()
        engine = EvolutionEngine(cfg, MockProvider(seed=cfg.seed), FlakyEvaluator())
        engine.initialize_population()
        failed = [c for c in engine.archive if c.error]
        assert failed
        for candidate in failed:
            assert candidate.fitness == 0.0
            assert "synthetic failure" in candidate.error
            assert candidate.features is not None  # parsed fine, failed at runtime

    def test_same_seed_identical_archives(self):
        results = []
        for _ in range(2):
            engine = make_engine()
            engine.run()
            results.append(archive_hash(record_from_candidate(c) for c in engine.archive))
        assert results[0] == results[1]


class TestStepGeneration:
    def test_elitism_never_loses_the_best(self):
        engine = make_engine()
        result = engine.run()
        bests = [g.population_best for g in result.generations]
        assert all(b >= a for a, b in zip(bests, bests[1:]))

    def test_guidance_disabled_is_vanilla(self):
        provider = RecordingProvider(seed=3)
        cfg = small_config(guidance_enabled=False, seed=3)
        engine = EvolutionEngine(cfg, provider, SyntheticEvaluator())
        engine.run()
        assert engine.model is None
        assert all(b.guidance_sentence is None for b in provider.bundles)
        assert all(c.guidance is None for c in engine.archive)

    def test_generation_one_offspring_all_guided_at_default_trigger(self):
        # min_archive defaults to mu: the surrogate trains right after init
        cfg = RunConfig(
            mu=8, lambda_=8, budget=24, seed=11,
            surrogate_params=GbtParams(n_trees=10, max_depth=2),
        )
        engine = EvolutionEngine(cfg, MockProvider(seed=11), SyntheticEvaluator())
        engine.initialize_population()
        engine.step_generation()
        offspring = [c for c in engine.archive if c.generation == 1]
        assert len(offspring) == 8
        assert all(c.guidance is not None for c in offspring)
        assert all(c.prompt_kind in ("random_new", "refine") for c in offspring)

    def test_no_guidance_before_trigger(self):
        cfg = small_config(min_archive=30)  # never reached within budget=40? reached at gen 5
        engine = EvolutionEngine(cfg, MockProvider(seed=7), SyntheticEvaluator())
        engine.initialize_population()
        engine.step_generation()
        offspring = [c for c in engine.archive if c.generation == 1]
        assert all(c.guidance is None for c in offspring)

    def test_budget_never_exceeded_and_exact(self):
        engine = make_engine(budget=30)
        result = engine.run()
        assert len(result.archive) == 30
        # last generation was cut short: 4 + 6 + 6 + 6 + 6 = 28, then 2
        last_gen = max(c.generation for c in result.archive)
        assert sum(1 for c in result.archive if c.generation == last_gen) == 2

    def test_budget_equal_to_mu_skips_the_loop(self):
        engine = make_engine(budget=4)
        result = engine.run()
        assert len(result.archive) == 4
        assert all(c.generation == 0 for c in result.archive)

    def test_full_scale_budget_arithmetic(self):
        # mu = lambda = 8 with budget 200: one init generation plus 24
        # offspring generations, archive exactly at budget
        engine = make_engine(mu=8, lambda_=8, budget=200, seed=5)
        result = engine.run()
        assert len(result.archive) == 200
        assert max(c.generation for c in result.archive) == 24
        assert len(result.generations) == 25


class TestRun:
    def test_lineage_terminates_at_generation_zero(self):
        engine = make_engine()
        result = engine.run()
        for candidate in result.archive:
            node = candidate
            hops = 0
            while node.parent_id is not None:
                node = result.archive.get(node.parent_id)
                hops += 1
                assert hops < 100
            assert node.generation == 0

    def test_every_candidate_evaluated_once(self):
        class CountingEvaluator(SyntheticEvaluator):
            def __init__(self):
                super().__init__()
                self.calls = 0

            def evaluate(self, code):
                self.calls += 1
                return super().evaluate(code)

        evaluator = CountingEvaluator()
        cfg = small_config()
        engine = EvolutionEngine(cfg, MockProvider(seed=cfg.seed), evaluator)
        result = engine.run()
        assert evaluator.calls == len(result.archive)

    def test_token_totals_match_archive(self):
        engine = make_engine()
        result = engine.run()
        assert result.prompt_tokens == sum(c.usage.prompt_tokens for c in result.archive)
        assert result.completion_tokens == sum(c.usage.completion_tokens for c in result.archive)

    def test_provider_outage_aborts_with_partial_archive(self):
        cfg = small_config()
        engine = EvolutionEngine(cfg, DeadProvider(), SyntheticEvaluator())
        with pytest.raises(LLMUnavailable):
            engine.run()
        assert len(engine.archive) == 0

    def test_threaded_generation_completes(self):
        engine = make_engine(max_inflight=4, budget=20)
        result = engine.run()
        assert len(result.archive) == 20

    def test_best_is_archive_maximum(self):
        engine = make_engine()
        result = engine.run()
        assert result.best.fitness == max(c.fitness for c in result.archive)


class TestRunConfigValidation:
    def test_budget_below_mu_rejected(self):
        with pytest.raises(ValueError):
            RunConfig(mu=8, budget=4)

    def test_min_archive_floor(self):
        with pytest.raises(ValueError):
            RunConfig(min_archive=1)

    def test_default_min_archive_is_mu(self):
        assert RunConfig(mu=5, budget=10).min_archive == 5
