"""Metric evaluation over generation runs.

Per-prompt metrics (lexical Vendi, embedding Vendi, truncated entropy) get
one row per (configuration, prompt, metric); pooled across-prompt metrics
(precision, recall, mauve_lite) get one value per (configuration, metric)
against the reference set. Paired one-tailed t-tests compare named
configuration pairs over their per-prompt series.
"""

from __future__ import annotations

import hashlib
import json
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from ..features import (
    EmbeddingMatrix,
    embedding_kernel,
    ngram_kernel,
    ngram_profile,
    read_embeddings,
    tokenize,
)
from ..metrics import (
    MauveLiteConfig,
    improved_precision_recall,
    mauve_lite,
    paired_ttest_one_tailed,
    truncated_entropy,
    vendi_score,
)
from .ingest import read_samples

PER_PROMPT_METRICS = ("vs_ngram", "vs_embed", "te")


@dataclass(frozen=True)
class MetricRecord:
    metric: str
    scope: str  # "per_prompt" | "across_prompts"
    label: str
    value: float
    prompt_id: Optional[str] = None
    params: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        rec = {"metric": self.metric, "scope": self.scope, "label": self.label, "value": self.value, "params": self.params}
        if self.prompt_id is not None:
            rec["prompt_id"] = self.prompt_id
        return rec


@dataclass
class RunReport:
    per_prompt: List[MetricRecord] = field(default_factory=list)
    across: List[MetricRecord] = field(default_factory=list)
    ttests: List[dict] = field(default_factory=list)
    notices: List[str] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def per_prompt_series(self, label: str, metric: str) -> Dict[str, float]:
        return {
            r.prompt_id: r.value
            for r in self.per_prompt
            if r.label == label and r.metric == metric
        }

    def across_value(self, label: str, metric: str) -> float:
        for r in self.across:
            if r.label == label and r.metric == metric:
                return r.value
        raise KeyError(f"no across-prompt record for ({label}, {metric})")

    def to_records(self) -> List[dict]:
        recs = [r.to_json() for r in self.per_prompt + self.across]
        for t in self.ttests:
            recs.append(
                {
                    "metric": f"ttest:{t['metric']}",
                    "scope": "comparison",
                    "label": f"{t['greater']}>{t['lesser']}",
                    "value": t["p_value"],
                    "params": {k: v for k, v in t.items() if k != "p_value"},
                }
            )
        return recs

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(json.dumps({"type": "provenance", **self.provenance}, sort_keys=True) + "\n")
            for n in self.notices:
                f.write(json.dumps({"type": "notice", "message": n}) + "\n")
            for rec in self.to_records():
                f.write(json.dumps(rec, sort_keys=True) + "\n")


def _file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()[:16]


def load_run(run_dir) -> Tuple[str, dict, Dict[str, List[dict]]]:
    """Load one configuration's run directory, enforcing a uniform config hash."""
    run_dir = Path(run_dir)
    with open(run_dir / "manifest.json", "r", encoding="utf-8") as f:
        manifest = json.load(f)
    label = manifest["label"]
    chash = manifest["config_hash"]
    by_prompt: Dict[str, List[dict]] = {}
    for prompt_id, fname in sorted(manifest["sample_files"].items()):
        records = read_samples(run_dir / fname)
        bad = {r.get("config_hash") for r in records} - {chash}
        if bad:
            raise ValueError(
                f"run {label!r} prompt {prompt_id}: mixed config hashes {sorted(bad)} != {chash}"
            )
        by_prompt[prompt_id] = records
    return label, manifest, by_prompt


def _group_reference(reference: Sequence[dict]) -> Dict[str, List[dict]]:
    grouped: Dict[str, List[dict]] = defaultdict(list)
    for rec in reference:
        grouped[rec["prompt_id"]].append(rec)
    return dict(grouped)


def _vs_ngram(texts: Sequence[str]) -> float:
    profiles = [ngram_profile(tokenize(t)) for t in texts]
    return vendi_score(ngram_kernel(profiles)).value


def evaluate(
    run_dirs: Sequence,
    reference,
    embeddings: Optional[Dict[str, object]] = None,
    pairs: Sequence[Tuple[str, str]] = (),
    k: int = 3,
    mauve_cfg: MauveLiteConfig = MauveLiteConfig(),
    pr_mode: str = "pooled",
    include_reference_per_prompt: bool = True,
) -> RunReport:
    """Compute the metric report for one or more runs against a reference.

    embeddings maps a label (or "reference") to a DGEM path or an
    EmbeddingMatrix; when absent, embedding-based metrics are skipped with a
    notice and lexical metrics still run. pairs lists (greater, lesser)
    labels for the one-tailed t-tests.
    """
    if pr_mode not in ("pooled", "per_prompt_mean"):
        raise ValueError(f"unknown pr_mode {pr_mode!r}")
    report = RunReport()
    runs: Dict[str, Dict[str, List[dict]]] = {}
    report.provenance["runs"] = {}
    for run_dir in run_dirs:
        label, manifest, by_prompt = load_run(run_dir)
        if label in runs:
            raise ValueError(f"duplicate run label {label!r}")
        runs[label] = by_prompt
        report.provenance["runs"][label] = {
            "config_hash": manifest["config_hash"],
            "global_seed": manifest.get("global_seed"),
            "sample_files": {
                pid: _file_sha256(Path(run_dir) / fname)
                for pid, fname in sorted(manifest.get("sample_files", {}).items())
            },
        }

    if isinstance(reference, (str, Path)):
        report.provenance["reference_file"] = _file_sha256(reference)
        reference = read_samples(reference)
    ref_by_prompt = _group_reference(reference)

    emb: Dict[str, EmbeddingMatrix] = {}
    report.provenance["embeddings"] = {}
    for name, source in (embeddings or {}).items():
        if isinstance(source, EmbeddingMatrix):
            emb[name] = source
        else:
            emb[name] = read_embeddings(source)
            report.provenance["embeddings"][name] = _file_sha256(source)

    # per-prompt tables
    tables = dict(runs)
    if include_reference_per_prompt:
        tables["reference"] = ref_by_prompt
    for label, by_prompt in tables.items():
        have_emb = label in emb or (label == "reference" and "reference" in emb)
        if not have_emb:
            report.notices.append(f"no embeddings for {label!r}: vs_embed and te skipped")
        for prompt_id, records in sorted(by_prompt.items()):
            texts = [r["text"] for r in records]
            report.per_prompt.append(
                MetricRecord("vs_ngram", "per_prompt", label, _vs_ngram(texts), prompt_id, {"n": len(texts)})
            )
            if have_emb:
                rows = emb[label].select([r["id"] for r in records])
                report.per_prompt.append(
                    MetricRecord(
                        "vs_embed", "per_prompt", label,
                        vendi_score(embedding_kernel(rows)).value, prompt_id, {"n": rows.n},
                    )
                )
                te = truncated_entropy(rows)
                report.per_prompt.append(
                    MetricRecord("te", "per_prompt", label, te.value, prompt_id, {"n": rows.n, **te.params})
                )

    # across-prompt metrics need embeddings on both sides
    for label, by_prompt in runs.items():
        if label not in emb or "reference" not in emb:
            report.notices.append(f"across-prompt metrics for {label!r} skipped: embeddings missing")
            continue
        gen_ids = [r["id"] for pid in sorted(by_prompt) for r in by_prompt[pid]]
        ref_ids = [r["id"] for pid in sorted(ref_by_prompt) for r in ref_by_prompt[pid]]
        gen_all = emb[label].select(gen_ids)
        ref_all = emb["reference"].select(ref_ids)
        if pr_mode == "pooled":
            pr = improved_precision_recall(gen_all, ref_all, k=k)
            precision, recall = pr.precision, pr.recall
        else:
            shared = sorted(set(by_prompt) & set(ref_by_prompt))
            per = [
                improved_precision_recall(
                    emb[label].select([r["id"] for r in by_prompt[pid]]),
                    emb["reference"].select([r["id"] for r in ref_by_prompt[pid]]),
                    k=k,
                )
                for pid in shared
            ]
            precision = sum(p.precision for p in per) / len(per)
            recall = sum(p.recall for p in per) / len(per)
        pr_params = {"k": k, "mode": pr_mode, "n_gen": gen_all.n, "n_ref": ref_all.n}
        report.across.append(MetricRecord("precision", "across_prompts", label, precision, params=pr_params))
        report.across.append(MetricRecord("recall", "across_prompts", label, recall, params=pr_params))
        mv = mauve_lite(gen_all, ref_all, mauve_cfg)
        report.across.append(
            MetricRecord("mauve_lite", "across_prompts", label, mv.value, params=mv.params)
        )

    # paired one-tailed t-tests: H1 mean(greater) > mean(lesser)
    for greater, lesser in pairs:
        for metric in PER_PROMPT_METRICS:
            sg = report.per_prompt_series(greater, metric)
            sl = report.per_prompt_series(lesser, metric)
            shared = sorted(set(sg) & set(sl))
            if len(shared) < 2:
                continue
            res = paired_ttest_one_tailed([sg[p] for p in shared], [sl[p] for p in shared])
            report.ttests.append(
                {
                    "metric": metric,
                    "greater": greater,
                    "lesser": lesser,
                    "t": res.t,
                    "df": res.df,
                    "p_value": res.p_value,
                    "mean_diff": res.mean_diff,
                    "n_prompts": len(shared),
                    "degenerate": res.degenerate,
                }
            )
    return report
