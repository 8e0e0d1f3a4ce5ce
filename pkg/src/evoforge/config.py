"""Run configuration: a JSON document of five flat sections.

Every section and key is validated against the schema below; unknown
sections, unknown keys and wrong types are hard errors, so a typo can
never silently fall back to a default.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from .benchmarks import AoccParams, ProblemSpec
from .engine import RunConfig
from .evaluators import BenchmarkEvaluator, SyntheticEvaluator
from .features import FEATURE_NAMES
from .llm import MUTATION_PROMPTS, TASK_PROMPT, HttpChatProvider, MockProvider
from .surrogate import GbtParams


class ConfigError(Exception):
    """Invalid run configuration."""


_NUMBER = (int, float)

# section -> key -> (allowed types, default)
SCHEMA: dict[str, dict[str, tuple[tuple[type, ...], Any]]] = {
    "llm": {
        "provider": ((str,), "mock"),
        "model": ((str,), "mock"),
        "endpoint": ((str,), ""),
        "api_key_env": ((str,), ""),
        "temperature": (_NUMBER + (type(None),), None),
        "max_inflight": ((int,), 1),
        "mock_obedience": (_NUMBER, 0.8),
    },
    "es": {
        "mu": ((int,), 8),
        "lambda": ((int,), 8),
        "budget": ((int,), 200),
        "elitism": ((bool,), True),
        "seed": ((int,), 0),
    },
    "guidance": {
        "enabled": ((bool,), True),
        "min_archive": ((int, type(None)), None),
        "n_trees": ((int,), 30),
        "max_depth": ((int,), 3),
        "learning_rate": (_NUMBER, 0.1),
        "min_leaf": ((int,), 1),
    },
    "eval": {
        "kind": ((str,), "synthetic"),
        "weights": ((dict, type(None)), None),
        "scales": ((dict, type(None)), None),
        "suite": ((str,), "sbox_separable"),
        "fids": ((list,), [1, 2, 3, 4, 5]),
        "instances": ((int,), 3),
        "dim": ((int,), 5),
        "inner_budget": ((int, type(None)), None),
        "aocc_lb": (_NUMBER, -8.0),
        "aocc_ub": (_NUMBER, 2.0),
        "time_limit_s": (_NUMBER, 60.0),
        "sandbox_cmd": ((list, type(None)), None),
    },
    "prompts": {
        "task": ((str,), TASK_PROMPT),
        "mutations": ((dict,), dict(MUTATION_PROMPTS)),
    },
}


@dataclass
class RunSetup:
    """Everything needed to start one run."""

    run_config: RunConfig
    provider: object
    evaluator: object
    raw: dict


def _validated(data: dict) -> dict:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object of sections")
    unknown_sections = set(data) - set(SCHEMA)
    if unknown_sections:
        raise ConfigError(f"unknown config sections: {sorted(unknown_sections)}")
    merged: dict[str, dict[str, Any]] = {}
    for section, keys in SCHEMA.items():
        given = data.get(section, {})
        if not isinstance(given, dict):
            raise ConfigError(f"section {section!r} must be an object")
        unknown = set(given) - set(keys)
        if unknown:
            raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
        merged[section] = {}
        for key, (types, default) in keys.items():
            value = given.get(key, default)
            if isinstance(value, bool) and bool not in types:
                raise ConfigError(f"{section}.{key}: expected {types}, got bool")
            if not isinstance(value, types):
                raise ConfigError(
                    f"{section}.{key}: expected {' or '.join(t.__name__ for t in types)}, "
                    f"got {type(value).__name__}"
                )
            merged[section][key] = value
    return merged


def _check_feature_map(mapping: Optional[dict], what: str) -> None:
    if mapping is None:
        return
    unknown = set(mapping) - set(FEATURE_NAMES)
    if unknown:
        raise ConfigError(f"{what} refers to unknown features: {sorted(unknown)}")


def load_config(path: Path) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return _validated(data)


def build_setup(config: dict, seed: Optional[int] = None) -> RunSetup:
    """Construct provider, evaluator and engine config from validated data."""
    llm = config["llm"]
    es = config["es"]
    guidance = config["guidance"]
    ev = config["eval"]
    prompts = config["prompts"]

    run_seed = es["seed"] if seed is None else seed

    unknown_kinds = set(prompts["mutations"]) - set(MUTATION_PROMPTS)
    if unknown_kinds:
        raise ConfigError(f"unknown mutation prompt kinds: {sorted(unknown_kinds)}")
    if not prompts["mutations"]:
        raise ConfigError("prompts.mutations must not be empty")

    try:
        run_config = RunConfig(
            mu=es["mu"],
            lambda_=es["lambda"],
            budget=es["budget"],
            elitism=es["elitism"],
            guidance_enabled=guidance["enabled"],
            min_archive=guidance["min_archive"],
            surrogate_params=GbtParams(
                n_trees=guidance["n_trees"],
                max_depth=guidance["max_depth"],
                learning_rate=float(guidance["learning_rate"]),
                min_leaf=guidance["min_leaf"],
            ),
            seed=run_seed,
            task_prompt=prompts["task"],
            mutation_prompts=dict(prompts["mutations"]),
            max_inflight=llm["max_inflight"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    if llm["provider"] == "mock":
        provider = MockProvider(seed=run_seed, obedience=float(llm["mock_obedience"]))
    elif llm["provider"] == "http":
        if not llm["endpoint"]:
            raise ConfigError("llm.endpoint is required for the http provider")
        provider = HttpChatProvider(
            endpoint=llm["endpoint"],
            model=llm["model"],
            api_key_env=llm["api_key_env"],
            temperature=llm["temperature"],
        )
    else:
        raise ConfigError(f"llm.provider must be 'mock' or 'http', got {llm['provider']!r}")

    if ev["kind"] == "synthetic":
        _check_feature_map(ev["weights"], "eval.weights")
        _check_feature_map(ev["scales"], "eval.scales")
        scales = None
        if ev["scales"] is not None:
            scales = {name: tuple(pair) for name, pair in ev["scales"].items()}
        evaluator = SyntheticEvaluator(weights=ev["weights"], scales=scales)
    elif ev["kind"] == "benchmark":
        inner_budget = ev["inner_budget"] or 100 * ev["dim"]
        problems = [
            ProblemSpec(
                suite=ev["suite"],
                fid=fid,
                instance=instance,
                dim=ev["dim"],
                inner_budget=inner_budget,
            )
            for fid in ev["fids"]
            for instance in range(1, ev["instances"] + 1)
        ]
        try:
            aocc_params = AoccParams(lb=float(ev["aocc_lb"]), ub=float(ev["aocc_ub"]))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        evaluator = BenchmarkEvaluator(
            problems,
            aocc_params=aocc_params,
            time_limit_s=float(ev["time_limit_s"]),
            sandbox_cmd=ev["sandbox_cmd"],
        )
    else:
        raise ConfigError(f"eval.kind must be 'synthetic' or 'benchmark', got {ev['kind']!r}")

    return RunSetup(run_config=run_config, provider=provider, evaluator=evaluator, raw=config)
