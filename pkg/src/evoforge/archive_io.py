"""Archive persistence: JSONL records, the run manifest, canonical hashing.

One JSONL line per candidate in archive order.  The canonical form used
for hashing fixes the field order and drops timestamps, so two runs with
the same seed and config hash identically even though their wall-clock
stamps differ.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable, Optional

from .engine import Archive, Candidate, RunConfig, RunResult

#: Serialisation order of every archive record; created_at stays last and
#: is excluded from the canonical hash.
RECORD_FIELDS = (
    "id",
    "generation",
    "parent_id",
    "prompt_kind",
    "guidance",
    "fitness",
    "error",
    "features",
    "description",
    "code",
    "llm_usage",
    "created_at",
)


def record_from_candidate(candidate: Candidate) -> dict:
    guidance = None
    if candidate.guidance is not None:
        guidance = {
            "feature": candidate.guidance.feature_name,
            "direction": candidate.guidance.direction,
            "magnitude": candidate.guidance.magnitude,
        }
        if candidate.attribution_phi is not None:
            guidance["attribution"] = {
                "phi0": candidate.attribution_phi0,
                "phi": list(candidate.attribution_phi),
            }
    features = candidate.features.as_dict() if candidate.features is not None else None
    return {
        "id": candidate.id,
        "generation": candidate.generation,
        "parent_id": candidate.parent_id,
        "prompt_kind": candidate.prompt_kind,
        "guidance": guidance,
        "fitness": candidate.fitness,
        "error": candidate.error,
        "features": features,
        "description": candidate.description,
        "code": candidate.code,
        "llm_usage": {
            "prompt_tokens": candidate.usage.prompt_tokens,
            "completion_tokens": candidate.usage.completion_tokens,
        },
        "created_at": candidate.created_at,
    }


def dump_record(record: dict) -> str:
    ordered = {key: record.get(key) for key in RECORD_FIELDS}
    return json.dumps(ordered, ensure_ascii=False)


def canonical_line(record: dict) -> str:
    ordered = {key: record.get(key) for key in RECORD_FIELDS if key != "created_at"}
    return json.dumps(ordered, ensure_ascii=False, separators=(",", ":"))


def archive_hash(records: Iterable[dict]) -> str:
    digest = hashlib.sha256()
    for record in records:
        digest.update(canonical_line(record).encode())
        digest.update(b"\n")
    return digest.hexdigest()


def write_archive(archive: Archive, path: Path) -> list[dict]:
    records = [record_from_candidate(c) for c in archive]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(dump_record(record) + "\n")
    return records


def load_archive(path: Path) -> list[dict]:
    records = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def manifest_payload(
    config: RunConfig,
    records: list[dict],
    result: Optional[RunResult] = None,
    status: str = "completed",
) -> dict:
    payload = {
        "status": status,
        "seed": config.seed,
        "config": {
            "mu": config.mu,
            "lambda": config.lambda_,
            "budget": config.budget,
            "elitism": config.elitism,
            "guidance_enabled": config.guidance_enabled,
            "min_archive": config.min_archive,
            "surrogate": {
                "n_trees": config.surrogate_params.n_trees,
                "max_depth": config.surrogate_params.max_depth,
                "learning_rate": config.surrogate_params.learning_rate,
                "min_leaf": config.surrogate_params.min_leaf,
            },
            "max_inflight": config.max_inflight,
            "mutation_prompts": config.mutation_prompts,
        },
        "evaluations": len(records),
        "archive_hash": archive_hash(records),
        "total_prompt_tokens": sum(r["llm_usage"]["prompt_tokens"] for r in records),
        "total_completion_tokens": sum(r["llm_usage"]["completion_tokens"] for r in records),
    }
    if result is not None:
        payload["best_id"] = result.best_id
        payload["best_fitness"] = result.best.fitness
        payload["wall_time_s"] = result.wall_time_s
        payload["generations"] = [
            {
                "generation": g.generation,
                "population_best": g.population_best,
                "archive_size": g.archive_size,
                "surrogate_trained": g.surrogate_trained,
            }
            for g in result.generations
        ]
    return payload


def persist_run(
    config: RunConfig,
    archive: Archive,
    out_dir: Path,
    result: Optional[RunResult] = None,
    status: str = "completed",
) -> dict:
    """Write archive.jsonl + manifest.json; returns the manifest payload."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = write_archive(archive, out_dir / "archive.jsonl")
    payload = manifest_payload(config, records, result=result, status=status)
    (out_dir / "manifest.json").write_text(json.dumps(payload, indent=2), encoding="utf-8")
    return payload
