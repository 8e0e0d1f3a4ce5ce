"""Post-hoc analyses over archive records.

All functions work on the plain dict records of archive.jsonl, so they can
be used on freshly produced runs and on files from disk alike.
"""

from __future__ import annotations

import math
import warnings
from typing import Iterable, Optional, Sequence

PROMPT_KINDS = ("random_new", "refine")


def best_so_far(fitnesses: Iterable[float]) -> list[float]:
    out: list[float] = []
    for value in fitnesses:
        out.append(value if not out else max(out[-1], value))
    return out


def run_best_so_far(records: Sequence[dict]) -> list[float]:
    return best_so_far(r["fitness"] for r in records)


# ---------------------------------------------------------------------------
# Guidance consistency
# ---------------------------------------------------------------------------


def consistency_analysis(records: Sequence[dict]) -> dict:
    """Per-prompt-kind match/mismatch counts of guided offspring.

    Match means the child moved the guided feature strictly in the guided
    direction relative to its parent; a zero delta counts as a mismatch.
    Offspring whose own or whose parent's features are missing are skipped
    and reported separately.
    """
    by_id = {r["id"]: r for r in records}
    table = {kind: {"match": 0, "mismatch": 0} for kind in PROMPT_KINDS}
    skipped = 0
    for record in records:
        guidance = record.get("guidance")
        if not guidance:
            continue
        parent = by_id.get(record.get("parent_id") or "")
        child_features = record.get("features")
        parent_features = parent.get("features") if parent else None
        if child_features is None or parent_features is None:
            skipped += 1
            continue
        feature = guidance["feature"]
        delta = child_features[feature] - parent_features[feature]
        wanted_up = guidance["direction"] == "increase"
        matched = delta > 0 if wanted_up else delta < 0
        kind = record["prompt_kind"]
        bucket = table.setdefault(kind, {"match": 0, "mismatch": 0})
        bucket["match" if matched else "mismatch"] += 1
    table["skipped"] = skipped
    return table


def guidance_feature_counts(records: Sequence[dict]) -> dict[str, dict[str, int]]:
    """How often each feature was suggested, split by direction."""
    counts: dict[str, dict[str, int]] = {}
    for record in records:
        guidance = record.get("guidance")
        if not guidance:
            continue
        bucket = counts.setdefault(guidance["feature"], {"increase": 0, "decrease": 0})
        bucket[guidance["direction"]] += 1
    return counts


# ---------------------------------------------------------------------------
# Convergence, speed-up, effect size
# ---------------------------------------------------------------------------


def convergence_curve(runs: Sequence[Sequence[dict]]) -> list[dict]:
    """Pointwise mean and normal-approximation 95% CI of best-so-far fitness.

    Runs of unequal length are truncated to the shortest.
    """
    if not runs:
        raise ValueError("need at least one run")
    curves = [run_best_so_far(records) for records in runs]
    horizon = min(len(c) for c in curves)
    if any(len(c) != horizon for c in curves):
        warnings.warn(f"runs of unequal length truncated to {horizon} evaluations")
    rows = []
    n = len(curves)
    for i in range(horizon):
        values = [curve[i] for curve in curves]
        mean = sum(values) / n
        if n > 1:
            var = sum((v - mean) ** 2 for v in values) / (n - 1)
            half = 1.96 * math.sqrt(var / n)
        else:
            half = 0.0
        rows.append(
            {"evaluation": i + 1, "mean": mean, "ci_low": mean - half, "ci_high": mean + half}
        )
    return rows


def speedup_curve(
    curve_a: Sequence[float], curve_b: Sequence[float]
) -> list[tuple[int, Optional[float]]]:
    """Per-evaluation speed-up of A over B (evaluation indices are 1-based).

    For each m, n is the first index at which B reaches A's fitness at m;
    the speed-up is n/m, or None when B never gets there.
    """
    out: list[tuple[int, Optional[float]]] = []
    for m, target in enumerate(curve_a, start=1):
        n = next((i for i, value in enumerate(curve_b, start=1) if value >= target), None)
        out.append((m, None if n is None else n / m))
    return out


def cliffs_delta(sample_a: Sequence[float], sample_b: Sequence[float]) -> float:
    """(#{a>b} - #{a<b}) / (|a|*|b|) over all cross pairs."""
    if not sample_a or not sample_b:
        raise ValueError("both samples must be non-empty")
    greater = sum(1 for a in sample_a for b in sample_b if a > b)
    lesser = sum(1 for a in sample_a for b in sample_b if a < b)
    return (greater - lesser) / (len(sample_a) * len(sample_b))


def auc(records_or_curve) -> float:
    """Rectangle-rule area under the best-so-far curve (sum over archive order)."""
    if records_or_curve and isinstance(records_or_curve[0], dict):
        curve = run_best_so_far(records_or_curve)
    else:
        curve = best_so_far(records_or_curve)
    return float(sum(curve))


def auc_and_effect(runs_a: Sequence[Sequence[dict]], runs_b: Sequence[Sequence[dict]]) -> dict:
    auc_a = [auc(run) for run in runs_a]
    auc_b = [auc(run) for run in runs_b]
    return {
        "auc_per_seed_a": auc_a,
        "auc_per_seed_b": auc_b,
        "mean_diff": sum(auc_a) / len(auc_a) - sum(auc_b) / len(auc_b),
        "cliffs_delta": cliffs_delta(auc_a, auc_b),
    }


# ---------------------------------------------------------------------------
# Code evolution graph
# ---------------------------------------------------------------------------

EDGE_CLASSES = ("refine", "random_new", "refine+increase", "random_new+increase", "decrease")

EDGE_COLORS = {
    "refine": "gold",
    "random_new": "lightblue",
    "refine+increase": "darkgreen",
    "random_new+increase": "darkblue",
    "decrease": "red",
}


def edge_class(prompt_kind: str, guidance_direction: Optional[str]) -> str:
    if guidance_direction == "decrease":
        return "decrease"
    if guidance_direction == "increase":
        return f"{prompt_kind}+increase"
    return prompt_kind


def ceg_document(records: Sequence[dict], feature: str) -> dict:
    """Lineage graph with per-node normalized fitness and one tracked feature."""
    fitnesses = [r["fitness"] for r in records]
    low, high = min(fitnesses), max(fitnesses)
    span = high - low
    nodes = []
    for record in records:
        value = None
        if record.get("features") is not None:
            value = record["features"].get(feature)
        nodes.append(
            {
                "id": record["id"],
                "generation": record["generation"],
                "normalized_fitness": 0.5 if span == 0 else (record["fitness"] - low) / span,
                "tracked_feature_value": value,
            }
        )
    edges = []
    for record in records:
        if record.get("parent_id") is None:
            continue
        guidance = record.get("guidance") or {}
        edges.append(
            {
                "parent": record["parent_id"],
                "child": record["id"],
                "prompt_kind": record["prompt_kind"],
                "guidance_direction": guidance.get("direction"),
                "class": edge_class(record["prompt_kind"], guidance.get("direction")),
            }
        )
    return {"feature": feature, "nodes": nodes, "edges": edges}


def _fitness_color(normalized: float) -> str:
    # dark blue (low) to yellow (high), HSV string understood by DOT
    hue = 0.66 - 0.51 * normalized
    value = 0.55 + 0.45 * normalized
    return f"{hue:.3f} 0.85 {value:.3f}"


def ceg_to_dot(document: dict) -> str:
    lines = ["digraph ceg {", "  rankdir=LR;", "  node [style=filled, shape=circle];"]
    for node in document["nodes"]:
        tracked = node["tracked_feature_value"]
        label = "" if tracked is None else f"{tracked:g}"
        lines.append(
            f'  "{node["id"]}" [fillcolor="{_fitness_color(node["normalized_fitness"])}", '
            f'label="{label}"];'
        )
    for edge in document["edges"]:
        color = EDGE_COLORS[edge["class"]]
        lines.append(
            f'  "{edge["parent"]}" -> "{edge["child"]}" '
            f'[color={color}, tooltip="{edge["class"]}"];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"
