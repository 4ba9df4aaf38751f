"""Dataset ingestion: raw writing-prompt NDJSON -> filtered canonical dataset.

A raw record is {"prompt": str, "responses": [str, ...]} (an optional
"prompt_id" is honored, which makes re-ingesting ingestion output a
no-op). Responses that open with boilerplate commentary are dropped first;
prompts keep only the first 50 surviving responses and are excluded
entirely when fewer than 50 survive.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from typing import Iterable, List, Sequence

DEFAULT_MIN_RESPONSES = 50
DEFAULT_KEEP = 50

# regex prefixes for leading commentary; matching is case-insensitive and
# anchored at the start of the response
DEFAULT_COMMENTARY_PATTERNS = (
    r"this is my first",
    r"feedback welcome",
    r"first post",
    r"edit\s*:",
    r"constructive criticism",
)


@dataclass(frozen=True)
class DatasetPrompt:
    prompt_id: str
    prompt: str
    responses: tuple

    def to_record(self) -> dict:
        return {"prompt_id": self.prompt_id, "prompt": self.prompt, "responses": list(self.responses)}


@dataclass(frozen=True)
class Sample:
    id: str
    text: str
    source: str  # "generated" | "reference"
    incipit: str


@dataclass
class SampleSet:
    prompt_id: str
    writing_prompt: str
    samples: List[Sample] = field(default_factory=list)

    def __post_init__(self):
        ids = [s.id for s in self.samples]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate sample ids in prompt {self.prompt_id}")


def _prompt_id_for(prompt: str) -> str:
    return "wp-" + hashlib.sha1(prompt.encode("utf-8")).hexdigest()[:10]


def ingest_dataset(
    lines: Iterable[str],
    min_responses: int = DEFAULT_MIN_RESPONSES,
    keep: int = DEFAULT_KEEP,
    commentary_patterns: Sequence[str] = DEFAULT_COMMENTARY_PATTERNS,
) -> List[DatasetPrompt]:
    """Parse and filter raw NDJSON lines into canonical dataset prompts.

    Malformed records are rejected with their line number. Commentary
    responses are dropped before the threshold and the keep cut, which makes
    ingestion idempotent on its own output.
    """
    compiled = [re.compile(p, re.IGNORECASE) for p in commentary_patterns]
    out: List[DatasetPrompt] = []
    seen_ids = set()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
        if not isinstance(rec, dict) or "prompt" not in rec or "responses" not in rec:
            raise ValueError(f"line {lineno}: expected an object with 'prompt' and 'responses'")
        prompt = rec["prompt"]
        responses = rec["responses"]
        if not isinstance(prompt, str) or not isinstance(responses, list) or not all(
            isinstance(r, str) for r in responses
        ):
            raise ValueError(f"line {lineno}: 'prompt' must be a string and 'responses' a list of strings")

        surviving = [r for r in responses if not any(p.match(r.lstrip()) for p in compiled)]
        if len(surviving) < min_responses:
            continue
        prompt_id = rec.get("prompt_id") or _prompt_id_for(prompt)
        if prompt_id in seen_ids:
            raise ValueError(f"line {lineno}: duplicate prompt_id {prompt_id!r}")
        seen_ids.add(prompt_id)
        out.append(DatasetPrompt(prompt_id=prompt_id, prompt=prompt, responses=tuple(surviving[:keep])))
    return out


def ingest_dataset_file(path, **kwargs) -> List[DatasetPrompt]:
    with open(path, "r", encoding="utf-8") as f:
        return ingest_dataset(f, **kwargs)


def write_dataset(prompts: Sequence[DatasetPrompt], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for p in prompts:
            f.write(json.dumps(p.to_record(), ensure_ascii=False) + "\n")


def read_dataset(path) -> List[DatasetPrompt]:
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            out.append(
                DatasetPrompt(
                    prompt_id=rec["prompt_id"], prompt=rec["prompt"], responses=tuple(rec["responses"])
                )
            )
    return out


def reference_sample_sets(prompts: Sequence[DatasetPrompt], incipit_tokens: int = 20) -> List[SampleSet]:
    """Turn canonical dataset prompts into reference SampleSets with incipits."""
    from .prompts import make_incipit

    sets = []
    for p in prompts:
        samples = [
            Sample(
                id=f"{p.prompt_id}-ref-{i:03d}",
                text=text,
                source="reference",
                incipit=make_incipit(text, n_tokens=incipit_tokens),
            )
            for i, text in enumerate(p.responses)
        ]
        sets.append(SampleSet(prompt_id=p.prompt_id, writing_prompt=p.prompt, samples=samples))
    return sets


def write_samples(samples: Sequence[dict], path) -> None:
    """Write sample records ({id, prompt_id, source, incipit, text, ...}) as NDJSON."""
    with open(path, "w", encoding="utf-8") as f:
        for rec in samples:
            f.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


def read_samples(path) -> List[dict]:
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            rec = json.loads(line)
            missing = {"id", "prompt_id", "source", "incipit", "text"} - set(rec)
            if missing:
                raise ValueError(f"{path} line {lineno}: sample record missing fields {sorted(missing)}")
            out.append(rec)
    return out


def reference_samples_records(sets: Sequence[SampleSet]) -> List[dict]:
    recs = []
    for ss in sets:
        for s in ss.samples:
            recs.append(
                {
                    "id": s.id,
                    "prompt_id": ss.prompt_id,
                    "source": s.source,
                    "incipit": s.incipit,
                    "text": s.text,
                    "config_hash": None,
                    "seed": None,
                }
            )
    return recs
