"""Acceptance suite: one test per criterion, one printed line per criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the line per
criterion.  Criteria 1-9 use only the mock provider and the synthetic
evaluator; the sandbox criteria live in the sandbox package's own suite.
"""

import json
import statistics
import time
from pathlib import Path

import numpy as np
import pytest

from evoforge import analytics, archive_io
from evoforge.attribution import shap_values
from evoforge.benchmarks import aocc
from evoforge.engine import EvolutionEngine, RunConfig
from evoforge.evaluators import SyntheticEvaluator
from evoforge.features import compute_complexity, extract_features
from evoforge.llm import MockProvider
from evoforge.surrogate import GbtParams, fit

from .oracles import brute_force_attribution
from .test_analytics import HAND_ARCHIVE, HAND_EXPECTED

GOLDEN = json.loads((Path(__file__).parent / "data" / "random_search_golden.json").read_text())


def report(number, name, started):
    elapsed = time.perf_counter() - started
    print(f"\n[criterion {number}] {name}: PASS ({elapsed:.2f}s)")


def test_criterion_1_aocc_boundary_identities():
    started = time.perf_counter()
    assert aocc([1e-12] * 40, 40, optimum=0.0) == 1.0
    assert aocc([1e3] * 40, 40, optimum=0.0) == 0.0
    assert aocc([1e3] * 20 + [1e-12] * 20, 40, optimum=0.0) == 0.5
    assert time.perf_counter() - started < 1.0
    report(1, "AOCC boundary identities", started)


def test_criterion_2_feature_golden():
    started = time.perf_counter()
    profile = compute_complexity(GOLDEN["source"])
    aggregates = profile.as_features()
    assert profile.function_count == 2
    assert aggregates["total_parameter_count"] == 5.0
    assert aggregates["total_cyclomatic_complexity"] == 4.0
    vector = extract_features(GOLDEN["source"])
    assert vector.as_dict() == GOLDEN["features"]
    assert time.perf_counter() - started < 1.0
    report(2, "feature golden values", started)


def test_criterion_3_surrogate_linear_signal():
    started = time.perf_counter()
    rng = np.random.default_rng(11)
    X = rng.uniform(0, 10, size=(200, 6))
    y = 3.0 * X[:, 2]
    model = fit(X, y)  # defaults: 100 trees, depth 3, lr 0.1
    rmse = float(np.sqrt(model.training_mse[-1]))
    assert rmse < 0.1 * float(np.std(y))
    assert len(model.training_mse) == 100
    assert all(
        later <= earlier + 1e-12
        for earlier, later in zip(model.training_mse, model.training_mse[1:])
    )
    assert time.perf_counter() - started < 10.0
    report(3, "surrogate fits linear signal, MSE monotone", started)


def test_criterion_4_shap_additivity_and_brute_force():
    started = time.perf_counter()
    rng = np.random.default_rng(404)
    # additivity over 100 random model/point pairs
    for _ in range(100):
        d = int(rng.integers(2, 9))
        X = rng.normal(size=(int(rng.integers(6, 30)), d))
        y = rng.normal(size=len(X))
        model = fit(X, y, GbtParams(n_trees=int(rng.integers(1, 6)), max_depth=3))
        x = rng.normal(size=d)
        attr = shap_values(model, x)
        assert abs(attr.phi0 + sum(attr.phi) - model.predict(x)) <= 1e-6
    # exhaustive-enumeration equivalence on 20 small instances
    for _ in range(20):
        d = int(rng.integers(2, 9))
        X = rng.normal(size=(int(rng.integers(6, 30)), d))
        y = rng.normal(size=len(X))
        model = fit(X, y, GbtParams(n_trees=int(rng.integers(1, 6)), max_depth=3))
        x = rng.normal(size=d)
        attr = shap_values(model, x)
        phi0, phi = brute_force_attribution(model, x)
        assert abs(attr.phi0 - phi0) <= 1e-6
        assert all(abs(a - b) <= 1e-6 for a, b in zip(attr.phi, phi))
    assert time.perf_counter() - started < 30.0
    report(4, "attribution additivity + brute-force equivalence", started)


# ---------------------------------------------------------------------------
# Closed-loop criteria 5 and 6 share one batch of runs.
# ---------------------------------------------------------------------------

LOOP_SEEDS = range(10)
LOOP_BUDGET = 120
TARGET_FITNESS = 0.9
LOOP_WEIGHTS = {"total_parameter_count": 5.0}
LOOP_SCALES = {"total_parameter_count": (0.0, 100.0)}


def closed_loop_run(seed, guided):
    config = RunConfig(
        mu=4,
        lambda_=8,
        budget=LOOP_BUDGET,
        seed=seed,
        guidance_enabled=guided,
        min_archive=20 if guided else None,
        surrogate_params=GbtParams(n_trees=30, max_depth=3),
    )
    engine = EvolutionEngine(
        config,
        MockProvider(seed=seed, obedience=0.8),
        SyntheticEvaluator(weights=LOOP_WEIGHTS, scales=LOOP_SCALES),
    )
    result = engine.run()
    records = [archive_io.record_from_candidate(c) for c in result.archive]
    return result, records


def evaluations_to_target(records):
    curve = analytics.run_best_so_far(records)
    return next(
        (i + 1 for i, value in enumerate(curve) if value >= TARGET_FITNESS),
        LOOP_BUDGET + 1,
    )


@pytest.fixture(scope="module")
def closed_loop_runs():
    started = time.perf_counter()
    runs = {
        guided: [closed_loop_run(seed, guided) for seed in LOOP_SEEDS]
        for guided in (True, False)
    }
    return runs, started


def test_criterion_5_guidance_speedup(closed_loop_runs):
    runs, started = closed_loop_runs
    guided_hits = [evaluations_to_target(records) for _, records in runs[True]]
    vanilla_hits = [evaluations_to_target(records) for _, records in runs[False]]
    guided_median = statistics.median(guided_hits)
    vanilla_median = statistics.median(vanilla_hits)
    assert guided_median <= 0.5 * vanilla_median, (guided_hits, vanilla_hits)

    guided_offspring = [
        record
        for _, records in runs[True]
        for record in records
        if record["guidance"] is not None
    ]
    named = sum(
        1 for record in guided_offspring
        if record["guidance"]["feature"] == "total_parameter_count"
    )
    assert named > 0.5 * len(guided_offspring), (named, len(guided_offspring))
    assert time.perf_counter() - started < 120.0
    print(
        f"\n[criterion 5] guidance speed-up: PASS "
        f"(median {guided_median} vs {vanilla_median} evaluations, "
        f"{named}/{len(guided_offspring)} guided offspring name total_parameter_count)"
    )


def test_criterion_6_elitism_invariant(closed_loop_runs):
    runs, started = closed_loop_runs
    for mode in (True, False):
        for result, _ in runs[mode]:
            bests = [g.population_best for g in result.generations]
            assert all(b >= a for a, b in zip(bests, bests[1:])), bests
    report(6, "population best monotone in every mode", started)


def test_criterion_7_speedup_operation():
    started = time.perf_counter()
    curve_a = [0.5, 0.9]
    curve_b = [0.1, 0.5, 0.7, 0.9]
    result = analytics.speedup_curve(curve_a, curve_b)
    assert result[1] == (2, 2.0)
    capped = analytics.speedup_curve([0.5, 0.95], curve_b)
    assert capped[1] == (2, None)
    report(7, "speed-up hand example and missing semantics", started)


def test_criterion_8_deterministic_archives():
    started = time.perf_counter()
    hashes = []
    for _ in range(2):
        config = RunConfig(
            mu=4, lambda_=6, budget=40, seed=1234,
            surrogate_params=GbtParams(n_trees=10, max_depth=2),
        )
        engine = EvolutionEngine(
            config, MockProvider(seed=1234), SyntheticEvaluator()
        )
        engine.run()
        records = [archive_io.record_from_candidate(c) for c in engine.archive]
        hashes.append(archive_io.archive_hash(records))
    assert hashes[0] == hashes[1]
    report(8, "same-seed runs hash identically", started)


def test_criterion_9_consistency_hand_table():
    started = time.perf_counter()
    assert analytics.consistency_analysis(HAND_ARCHIVE) == HAND_EXPECTED
    report(9, "hand-built consistency table", started)
