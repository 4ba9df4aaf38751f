"""Experiment orchestration: provider setup, seed derivation, generation runs.

Per-sample seeds are derived by hashing (global_seed, prompt_id,
sample_index), so every sample owns an independent random stream and adding
prompts or reordering work never perturbs existing samples. Sample files
carry the config hash and the derived seed for provenance.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import shlex
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from ..decoding import DecodeConfig, StdioProviderPair, generate_sequence
from ..features import tokenize
from ..toylm import NGramLM, SharpenSpec, ToyLMProvider, load_lm, sharpen_lm, train_ngram_lm
from .ingest import SampleSet, write_samples
from .prompts import build_prompt, make_incipit


@dataclass(frozen=True)
class ProviderSpec:
    kind: str = "toylm"  # "toylm" | "live"
    corpus: str = "bundled"  # "bundled" or a path to a one-document-per-line text file
    lm_path: Optional[str] = None  # pre-serialized LM instead of training from corpus
    order: int = 3
    alpha: float = 0.01
    sharpen_tau: Optional[float] = 0.6  # None -> the instruct side IS the base LM
    use_base: bool = False  # attach the base model for conformative mixing
    command: Optional[str] = None  # live adapter command line

    def __post_init__(self):
        if self.kind not in ("toylm", "live"):
            raise ValueError(f"unknown provider kind {self.kind!r}")
        if self.kind == "live" and not self.command:
            raise ValueError("live provider needs a command")


@dataclass(frozen=True)
class ExperimentConfig:
    label: str
    decode: DecodeConfig = DecodeConfig()
    provider: ProviderSpec = ProviderSpec()
    samples_per_prompt: int = 50
    incipit_tokens: int = 20
    prompt_style: str = "completion"
    global_seed: int = 0

    def __post_init__(self):
        if not self.label:
            raise ValueError("experiment label must be non-empty")
        if self.samples_per_prompt < 1 or self.incipit_tokens < 1:
            raise ValueError("samples_per_prompt and incipit_tokens must be positive")


def _jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {k: _jsonable(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, frozenset):
        return sorted(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def config_hash(cfg: ExperimentConfig) -> str:
    canon = json.dumps(_jsonable(cfg), sort_keys=True)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def derive_seed(global_seed: int, prompt_id: str, sample_index: int) -> int:
    """Splittable per-sample seed: a hash of (global_seed, prompt_id, index)."""
    digest = hashlib.sha256(f"{global_seed}|{prompt_id}|{sample_index}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def _load_toylm_base(spec: ProviderSpec) -> NGramLM:
    if spec.lm_path:
        return load_lm(spec.lm_path)
    if spec.corpus == "bundled":
        from ..fixture import bundled_base_lm

        return bundled_base_lm(order=spec.order, alpha=spec.alpha)
    with open(spec.corpus, "r", encoding="utf-8") as f:
        docs = [tokenize(line) for line in f if line.strip()]
    return train_ngram_lm(docs, order=spec.order, alpha=spec.alpha)


class ToyLMSession:
    """Instruct/base providers plus the text codec for a toylm ProviderSpec."""

    def __init__(self, spec: ProviderSpec):
        base_lm = _load_toylm_base(spec)
        if spec.sharpen_tau is not None:
            instruct_lm = sharpen_lm(base_lm, SharpenSpec(method="temperature", tau=spec.sharpen_tau))
        else:
            instruct_lm = base_lm
        self.instruct = ToyLMProvider(instruct_lm)
        self.base = ToyLMProvider(base_lm) if spec.use_base else None
        self.stop_tokens = self.instruct.stop_tokens

    def encode_prompt(self, text: str) -> List[int]:
        return self.instruct.encode_prompt(text)

    def decode(self, ids: Sequence[int]) -> str:
        return self.instruct.decode(ids)

    def close(self):
        pass


class LiveSession:
    """Adapter-backed providers speaking the stdio logits protocol."""

    def __init__(self, spec: ProviderSpec):
        self._pair = StdioProviderPair(shlex.split(spec.command))
        self.instruct = self._pair.instruct
        self.base = self._pair.base if spec.use_base else None
        self.stop_tokens = self._pair.stop_tokens

    def encode_prompt(self, text: str) -> List[int]:
        raise NotImplementedError(
            "live decoding consumes pre-tokenized contexts; tokenize prompts adapter-side"
        )

    def decode(self, ids: Sequence[int]) -> str:
        raise NotImplementedError("live decoding emits token ids; detokenize adapter-side")

    def close(self):
        self._pair.close()


def open_session(spec: ProviderSpec):
    return ToyLMSession(spec) if spec.kind == "toylm" else LiveSession(spec)


def run_experiment(
    cfg: ExperimentConfig,
    prompts: Sequence[SampleSet],
    out_dir,
    session=None,
) -> dict:
    """Generate samples_per_prompt continuations per prompt; write NDJSON files.

    Returns the run manifest. Provider failures on one prompt are recorded in
    the manifest's failures list and do not discard completed prompts.
    """
    out = Path(out_dir) / cfg.label
    out.mkdir(parents=True, exist_ok=True)
    own_session = session is None
    if session is None:
        session = open_session(cfg.provider)
    chash = config_hash(cfg)
    decode = dataclasses.replace(cfg.decode, stop_tokens=session.stop_tokens)
    manifest = {
        "label": cfg.label,
        "config": _jsonable(cfg),
        "config_hash": chash,
        "global_seed": cfg.global_seed,
        "prompt_ids": [],
        "failures": [],
        "sample_files": {},
    }
    try:
        for ss in prompts:
            refs = [s for s in ss.samples if s.source == "reference"][: cfg.samples_per_prompt]
            if len(refs) < cfg.samples_per_prompt:
                manifest["failures"].append(
                    {"prompt_id": ss.prompt_id, "error": f"only {len(refs)} reference samples for {cfg.samples_per_prompt} requested"}
                )
                continue
            records = []
            try:
                for idx, ref in enumerate(refs):
                    incipit = make_incipit(ref.text, n_tokens=cfg.incipit_tokens)
                    prompt_text = build_prompt(ss.writing_prompt, incipit, style=cfg.prompt_style)
                    seed = derive_seed(cfg.global_seed, ss.prompt_id, idx)
                    rng = np.random.default_rng(seed)
                    context = session.encode_prompt(prompt_text)
                    result = generate_sequence(session.instruct, session.base, decode, context, rng)
                    records.append(
                        {
                            "id": f"{ss.prompt_id}-gen-{idx:03d}",
                            "prompt_id": ss.prompt_id,
                            "source": "generated",
                            "incipit": incipit,
                            "text": session.decode(result.tokens),
                            "config_hash": chash,
                            "seed": seed,
                            "stop_reason": result.stop_reason,
                        }
                    )
            except Exception as exc:  # provider failure: keep completed prompts
                manifest["failures"].append({"prompt_id": ss.prompt_id, "error": str(exc)})
                continue
            path = out / f"{ss.prompt_id}.ndjson"
            write_samples(records, path)
            manifest["prompt_ids"].append(ss.prompt_id)
            manifest["sample_files"][ss.prompt_id] = path.name
    finally:
        if own_session:
            session.close()
    with open(out / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return manifest
