"""Provider-agnostic LLM access.

Prompt assembly, response parsing, an HTTP chat-completions provider, and a
deterministic mock provider.  The mock emits syntactically valid candidate
optimizers from a small parametric template family; its generator knobs are
recoverable from the emitted code, so a child can be produced by mutating
its parent's knobs.  When a guidance sentence is present the mock follows
it with a configurable obedience probability, which is what makes the
guidance loop testable end to end without any network access.
"""

from __future__ import annotations

import json
import os
import random
import re
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, replace
from typing import Optional

from .attribution import parse_guidance_sentence


class TransportError(Exception):
    """Provider unreachable or persistently failing."""


class RateLimited(TransportError):
    """Provider asked us to back off."""


class MalformedResponse(Exception):
    """Reply text does not follow the requested format."""


class MissingDescription(MalformedResponse):
    pass


class MissingCodeBlock(MalformedResponse):
    pass


EXAMPLE_CANDIDATE = '''import numpy as np
import math

class RandomSearch:
    def __init__(self, budget=10000, dim=10):
        self.budget = budget
        self.dim = dim
    def __call__(self, func):
        self.f_opt = np.inf
        self.x_opt = None
        for i in range(self.budget):
            x = np.random.uniform(func.bounds.lb, func.bounds.ub)

            f = func(x)
            if f < self.f_opt:
                self.f_opt = f
                self.x_opt = x

        return self.f_opt, self.x_opt
'''

TASK_PROMPT = f'''You are an excellent Python programmer.
You are a Python expert working on a new optimization algorithm.
You can use numpy v2 and some other standard libraries.
Your task is to develop a novel heuristic optimization algorithm for continuous optimization problems.
The optimization algorithm should work on different instances of noiseless unconstrained functions.
Your task is to write the optimization algorithm in Python code.
Each of the optimization functions has a search space between -5.0 (lower bound) and 5.0 (upper bound).
The dimensionality can be varied.
The code should contain an `__init__(self, budget, dim)` function with optional additional arguments
and the function `def __call__(self, func)`,
which should optimize the black box function `func` using `self.budget` function evaluations.
The func() can only be called as many times as the budget allows, not more.

An example of such code (a simple random search), is as follows:
```python
{EXAMPLE_CANDIDATE}```
Give an excellent and novel heuristic algorithm to solve this task and also give it a one-line description,
describing the main idea. Give the response in the format:
# Description: <short-description>
# Code:
```python
<code>
```'''

MUTATION_PROMPTS: dict[str, str] = {
    "random_new": "Generate a new algorithm that is different from the algorithms you have tried before.",
    "refine": "Refine the strategy of the selected solution to improve it.",
}


@dataclass(frozen=True)
class PromptBundle:
    task_prompt: str = TASK_PROMPT
    parent_code: Optional[str] = None
    parent_description: Optional[str] = None
    parent_error: Optional[str] = None
    mutation_instruction: Optional[str] = None
    guidance_sentence: Optional[str] = None

    def render(self) -> str:
        """Full prompt text: task, then parent context, then the mutation
        instruction with the guidance sentence appended after it."""
        parts = [self.task_prompt]
        if self.parent_code is not None:
            context = "The solution you should work from is:\n"
            if self.parent_description:
                context += f"# Description: {self.parent_description}\n"
            context += f"```python\n{self.parent_code}\n```"
            if self.parent_error:
                context += f"\nThe last evaluation of this solution failed with:\n{self.parent_error}"
            parts.append(context)
        instruction = self.mutation_instruction or ""
        if self.guidance_sentence:
            instruction = (instruction + " " + self.guidance_sentence).strip()
        if instruction:
            parts.append(instruction)
        return "\n\n".join(parts)


@dataclass(frozen=True)
class LLMUsage:
    prompt_tokens: int = 0
    completion_tokens: int = 0

    @property
    def total(self) -> int:
        return self.prompt_tokens + self.completion_tokens


@dataclass(frozen=True)
class LLMResponse:
    raw_text: str
    description: str
    code: str
    usage: LLMUsage


_FENCE_RE = re.compile(r"```(?:[a-zA-Z0-9_+-]*)\n(.*?)```", re.DOTALL)
_DESCRIPTION_RE = re.compile(r"^# Description:\s*(.+)$", re.MULTILINE)


def parse_response(raw: str) -> tuple[str, str]:
    """(description, code) from a reply; first description line and first
    fenced block win.  Raises MissingDescription / MissingCodeBlock."""
    desc_match = _DESCRIPTION_RE.search(raw)
    if not desc_match or not desc_match.group(1).strip():
        raise MissingDescription("no '# Description:' line in reply")
    code_match = _FENCE_RE.search(raw)
    if not code_match or not code_match.group(1).strip():
        raise MissingCodeBlock("no fenced code block in reply")
    return desc_match.group(1).strip(), code_match.group(1)


def _whitespace_tokens(text: str) -> int:
    return len(text.split())


class HttpChatProvider:
    """Chat-completions style HTTP provider.

    The API key is read from the environment variable named in the config
    and never stored.  Transient failures retry with exponential backoff.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key_env: str = "",
        temperature: Optional[float] = None,
        max_retries: int = 3,
        request_timeout: float = 120.0,
    ):
        self.endpoint = endpoint
        self.model = model
        self.api_key_env = api_key_env
        self.temperature = temperature
        self.max_retries = max_retries
        self.request_timeout = request_timeout

    def _post(self, payload: dict) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.api_key_env:
            key = os.environ.get(self.api_key_env, "")
            if key:
                headers["Authorization"] = f"Bearer {key}"
        request = urllib.request.Request(
            self.endpoint, data=json.dumps(payload).encode(), headers=headers
        )
        delay = 1.0
        last_error: Exception = TransportError("no attempt made")
        for _ in range(self.max_retries):
            try:
                with urllib.request.urlopen(request, timeout=self.request_timeout) as reply:
                    return json.loads(reply.read().decode())
            except urllib.error.HTTPError as exc:
                last_error = RateLimited(str(exc)) if exc.code == 429 else TransportError(str(exc))
            except (urllib.error.URLError, TimeoutError, json.JSONDecodeError) as exc:
                last_error = TransportError(str(exc))
            time.sleep(delay)
            delay *= 2
        raise last_error

    def generate(self, bundle: PromptBundle) -> LLMResponse:
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": bundle.render()}],
        }
        if self.temperature is not None:
            payload["temperature"] = self.temperature
        data = self._post(payload)
        try:
            content = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse(f"unexpected reply shape: {exc}") from exc
        usage = data.get("usage", {})
        description, code = parse_response(content)
        return LLMResponse(
            raw_text=content,
            description=description,
            code=code,
            usage=LLMUsage(
                prompt_tokens=int(usage.get("prompt_tokens", 0)),
                completion_tokens=int(usage.get("completion_tokens", 0)),
            ),
        )


# ---------------------------------------------------------------------------
# Deterministic mock provider
# ---------------------------------------------------------------------------

_FAMILIES = ("probe", "climb", "restart")
_CLASS_NAMES = {"probe": "ProbeSearch", "climb": "HillStep", "restart": "RestartClimb"}

#: knob -> (min, max); helper_params counts tunable arguments past the
#: leading x, so each helper has helper_params + 1 formal parameters.
KNOB_RANGES: dict[str, tuple[int, int]] = {
    "helpers": (0, 6),
    "helper_params": (1, 12),
    "branches": (0, 12),
    "loops": (0, 6),
    "statements": (0, 30),
    "depth": (0, 6),
}

#: Which knob most directly moves each feature the mock can be asked about.
FEATURE_KNOBS: dict[str, str] = {
    "node_count": "statements",
    "edge_count": "statements",
    "degree_mean": "statements",
    "degree_variance": "statements",
    "degree_entropy": "statements",
    "max_degree": "statements",
    "depth_min": "depth",
    "depth_mean": "depth",
    "depth_max": "depth",
    "avg_clustering": "statements",
    "degree_assortativity": "statements",
    "diameter": "depth",
    "avg_shortest_path": "depth",
    "function_count": "helpers",
    "total_cyclomatic_complexity": "branches",
    "mean_cyclomatic_complexity": "branches",
    "max_cyclomatic_complexity": "branches",
    "total_token_count": "statements",
    "mean_token_count": "statements",
    "total_parameter_count": "helper_params",
    "mean_parameter_count": "helper_params",
    "max_parameter_count": "helper_params",
}

#: Fallback order when a guided knob is pinned at its bound; every entry
#: still moves the asked-about feature in the same direction.
FALLBACK_KNOBS: dict[str, tuple[str, ...]] = {
    "helper_params": ("helpers",),
    "helpers": ("helper_params",),
    "statements": ("branches", "loops", "helpers"),
    "branches": ("helpers",),
    "loops": ("statements",),
    "depth": ("statements",),
}

#: Obedient mutations take a larger stride than random drift: an LLM told
#: to move a property moves it decisively, drift shuffles one unit.
GUIDED_STEP = 3

_VARIANT_RE = re.compile(
    r"# variant: family=(\w+) helpers=(\d+) params=(\d+) branches=(\d+) "
    r"loops=(\d+) statements=(\d+) depth=(\d+)"
)


@dataclass(frozen=True)
class MockGenome:
    family: str = "climb"
    helpers: int = 2
    helper_params: int = 3
    branches: int = 2
    loops: int = 1
    statements: int = 4
    depth: int = 1

    def marker(self) -> str:
        return (
            f"# variant: family={self.family} helpers={self.helpers} "
            f"params={self.helper_params} branches={self.branches} "
            f"loops={self.loops} statements={self.statements} depth={self.depth}"
        )


def parse_genome(code: str) -> Optional[MockGenome]:
    match = _VARIANT_RE.search(code)
    if not match:
        return None
    family = match.group(1)
    if family not in _FAMILIES:
        return None
    h, p, b, l, s, d = (int(match.group(i)) for i in range(2, 8))
    return MockGenome(family, h, p, b, l, s, d)


def _clamp(knob: str, value: int) -> int:
    lo, hi = KNOB_RANGES[knob]
    return min(max(value, lo), hi)


def _random_genome(rng: random.Random) -> MockGenome:
    # Parameter knobs start narrow; bulk knobs cover their full ranges so
    # size-ish features vary independently of parameterisation from the
    # very first generation.
    return MockGenome(
        family=rng.choice(_FAMILIES),
        helpers=rng.randint(1, 3),
        helper_params=rng.randint(2, 4),
        branches=rng.randint(0, 8),
        loops=rng.randint(0, 4),
        statements=rng.randint(0, 12),
        depth=rng.randint(0, 3),
    )


def _drift_one(genome: MockGenome, rng: random.Random, frozen: frozenset = frozenset()) -> MockGenome:
    knob = rng.choice([k for k in list(KNOB_RANGES) + ["family"] if k not in frozen])
    if knob == "family":
        choices = [f for f in _FAMILIES if f != genome.family]
        return replace(genome, family=rng.choice(choices))
    step = rng.choice((-1, 1))
    return replace(genome, **{knob: _clamp(knob, getattr(genome, knob) + step)})


def mutate_random(genome: MockGenome, rng: random.Random) -> MockGenome:
    """Unbiased drift: two uniformly chosen knobs each move one step up or
    down (the template family counts as a knob)."""
    return _drift_one(_drift_one(genome, rng), rng)


#: While obeying, drift must not undo the instruction: both parameter knobs
#: stay frozen for parameter-family features, the guided knob otherwise.
_FROZEN_WHILE_OBEYING = {
    "helper_params": frozenset({"helper_params", "helpers"}),
    "helpers": frozenset({"helper_params", "helpers"}),
}


def mutate_guided(
    genome: MockGenome, feature_name: str, direction: str, rng: random.Random
) -> MockGenome:
    """Move the knob mapped to ``feature_name`` in the instructed direction,
    plus one step of drift on some unrelated knob."""
    knob = FEATURE_KNOBS.get(feature_name)
    if knob is None:
        return mutate_random(genome, rng)
    sign = 1 if direction == "increase" else -1
    updates: dict[str, int] = {}
    # parameter-ish features need at least one helper to show up at all
    if knob == "helper_params" and genome.helpers == 0 and sign > 0:
        updates["helpers"] = 1
    moved = _clamp(knob, getattr(genome, knob) + sign * GUIDED_STEP)
    if moved != getattr(genome, knob):
        updates[knob] = moved
    else:
        for fallback in FALLBACK_KNOBS.get(knob, ()):
            shifted = _clamp(fallback, getattr(genome, fallback) + sign)
            if shifted != getattr(genome, fallback):
                updates[fallback] = shifted
                break
    mutated = replace(genome, **updates) if updates else genome
    frozen = _FROZEN_WHILE_OBEYING.get(knob, frozenset({knob}))
    return _drift_one(mutated, rng, frozen=frozen)


def render_candidate(genome: MockGenome) -> str:
    """Template-family source for one genome; always parseable and runnable
    under the budget/bounds contract of the task prompt."""
    p = genome.helper_params
    lines = ["import numpy as np", "", genome.marker(), ""]
    for h in range(genome.helpers):
        args = ", ".join(f"a{i}" for i in range(p))
        lines.append(f"def shift_{h}(x, {args}):")
        lines.append("    y = x + 0.05 * a0")
        for b in range(genome.branches):
            left, right = b % p, (b + 1) % p
            lines.append(f"    if a{left} > {0.1 * (b + 1):.2f}:")
            lines.append(f"        y = y - {0.01 * (b + 1):.2f} * a{right}")
        lines.append("    return y")
        lines.append("")
    lines.append(f"class {_CLASS_NAMES[genome.family]}:")
    lines.append("    def __init__(self, budget=10000, dim=10):")
    lines.append("        self.budget = budget")
    lines.append("        self.dim = dim")
    lines.append("")
    lines.append("    def __call__(self, func):")
    lines.append("        best_f = np.inf")
    lines.append("        best_x = None")
    lines.append("        step = 0.4")
    for s in range(genome.statements):
        lines.append(f"        gain_{s} = {0.9 + 0.01 * s:.2f} * step")
    chain = " + ".join(["step"] * (10 + 2 * genome.depth))
    lines.append(f"        probe = {chain}")
    for h in range(genome.helpers):
        args = ", ".join(f"{0.5 + 0.1 * i:.1f}" for i in range(p))
        lines.append(f"        step = shift_{h}(step, {args})")
    for r in range(genome.loops):
        lines.append(f"        for warm_{r} in range({r + 2}):")
        lines.append("            step = step * 0.9")
    if genome.family == "restart":
        lines.append("        stall = 0")
    lines.append("        for i in range(self.budget):")
    if genome.family == "probe":
        lines.append("            x = np.random.uniform(func.bounds.lb, func.bounds.ub)")
    elif genome.family == "climb":
        lines.append("            if best_x is None:")
        lines.append("                x = np.random.uniform(func.bounds.lb, func.bounds.ub)")
        lines.append("            else:")
        lines.append("                x = np.clip(best_x + step * np.random.standard_normal(self.dim), func.bounds.lb, func.bounds.ub)")
    else:
        lines.append("            if best_x is None or stall > 20:")
        lines.append("                x = np.random.uniform(func.bounds.lb, func.bounds.ub)")
        lines.append("                stall = 0")
        lines.append("            else:")
        lines.append("                x = np.clip(best_x + step * np.random.standard_normal(self.dim), func.bounds.lb, func.bounds.ub)")
    lines.append("            f = func(x)")
    lines.append("            if f < best_f:")
    lines.append("                best_f = f")
    lines.append("                best_x = x")
    if genome.family == "climb":
        lines.append("            else:")
        lines.append("                step = step * 0.98")
    elif genome.family == "restart":
        lines.append("            else:")
        lines.append("                stall = stall + 1")
    lines.append("        return best_f, best_x")
    lines.append("")
    return "\n".join(lines)


def describe_genome(genome: MockGenome) -> str:
    base = {
        "probe": "Uniform random probing of the box",
        "climb": "Gaussian hill climbing with shrinking steps",
        "restart": "Restarting hill climber with stall detection",
    }[genome.family]
    return f"{base}, tuned by {genome.helpers} shift helpers and {genome.statements} warm-up gains"


def _fallback_genome(code: str) -> MockGenome:
    # Foreign parent (no marker): derive a stable mid-range genome from the text.
    digest = sum(code.encode()) % 997
    return MockGenome(
        family=_FAMILIES[digest % 3],
        helpers=1 + digest % 3,
        helper_params=2 + digest % 3,
        branches=digest % 4,
        loops=digest % 3,
        statements=1 + digest % 5,
        depth=digest % 2,
    )


def mock_generate(
    bundle: PromptBundle,
    seed: int,
    obedience: float = 0.8,
    counter: int = 0,
) -> LLMResponse:
    """Deterministic reply for (bundle, seed, counter).

    Without a parent the genome is drawn fresh; with one, the parent's
    knobs are recovered and mutated, obeying any guidance sentence with
    probability ``obedience`` and drifting randomly otherwise.
    """
    rng = random.Random(f"{seed}:{counter}")
    parent = parse_genome(bundle.parent_code) if bundle.parent_code else None
    if bundle.parent_code is None:
        genome = _random_genome(rng)
    else:
        if parent is None:
            parent = _fallback_genome(bundle.parent_code)
        guidance = (
            parse_guidance_sentence(bundle.guidance_sentence)
            if bundle.guidance_sentence
            else None
        )
        if guidance is not None and rng.random() < obedience:
            genome = mutate_guided(parent, *guidance, rng)
        else:
            genome = mutate_random(parent, rng)
    code = render_candidate(genome)
    description = describe_genome(genome)
    raw = f"# Description: {description}\n# Code:\n```python\n{code}\n```"
    prompt_text = bundle.render()
    return LLMResponse(
        raw_text=raw,
        description=description,
        code=code,
        usage=LLMUsage(
            prompt_tokens=_whitespace_tokens(prompt_text),
            completion_tokens=_whitespace_tokens(raw),
        ),
    )


class MockProvider:
    """Stateful wrapper giving each request a fresh counter; deterministic
    per (seed, request index) in single-worker use."""

    def __init__(self, seed: int = 0, obedience: float = 0.8):
        self.seed = seed
        self.obedience = obedience
        self._counter = 0
        self._lock = threading.Lock()

    def generate(self, bundle: PromptBundle) -> LLMResponse:
        with self._lock:
            counter = self._counter
            self._counter += 1
        return mock_generate(bundle, self.seed, obedience=self.obedience, counter=counter)
